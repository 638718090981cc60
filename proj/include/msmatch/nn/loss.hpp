// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "msmatch/core/tensor.hpp"

namespace msmatch::nn {

/// Row-wise softmax of logits [N,K].
Tensor softmax(const Tensor& logits);

struct LossResult {
    double loss = 0.0;
    Tensor dlogits;  // d(loss)/d(logits), batch scaling already applied
};

/// Mean cross-entropy between one-hot labels and softmax(logits).
LossResult cross_entropy_mean(const Tensor& logits, const std::vector<int64_t>& labels);

/// (1/denom) * sum_i weight_i * CE(labels_i, softmax(logits_i)).
/// The denominator is fixed by the caller (full unlabeled batch size), not
/// the number of surviving rows.
LossResult cross_entropy_weighted(const Tensor& logits, const std::vector<int64_t>& labels,
                                  const std::vector<double>& weights, double denom);

/// Per-row cross-entropy values (oracle-friendly form).
std::vector<double> cross_entropy_rows(const Tensor& logits,
                                       const std::vector<int64_t>& labels);

std::vector<int64_t> argmax_rows(const Tensor& logits);

}  // namespace msmatch::nn
