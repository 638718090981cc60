// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "msmatch/data/dataset.hpp"
#include "msmatch/model/classifier.hpp"

namespace msmatch::saliency {

/// Input-gradient attribution under guided rules: at every rectifier the
/// backward signal is zeroed where the forward activation was <= 0 and
/// where the incoming signal is negative.
struct SaliencyMap {
    Tensor values;  // [C,H,W], gradient of the target logit w.r.t. the input
    std::string sample_id;
    int64_t target_class = 0;
};

/// sample must already be normalized exactly as in training; the model is
/// run in evaluation mode. Instrumentation of the backward pass is
/// exclusive per model, so callers serialize per snapshot.
SaliencyMap guided_backprop(model::Classifier& model, const data::ImageSample& sample,
                            int64_t target);

/// Max-absolute-value normalized rendering (grayscale for C != 3).
void write_saliency_png(const SaliencyMap& map, const std::filesystem::path& path);
/// Raw values as .npy alongside renderings.
void write_saliency_npy(const SaliencyMap& map, const std::filesystem::path& path);

}  // namespace msmatch::saliency
