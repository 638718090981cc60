// SPDX-License-Identifier: Apache-2.0

#include "msmatch/nn/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace msmatch::nn {

namespace {
// log-softmax of one row, written into out
void log_softmax_row(const double* row, int64_t K, double* out) {
    double m = row[0];
    for (int64_t k = 1; k < K; ++k) m = std::max(m, row[k]);
    double sum = 0.0;
    for (int64_t k = 0; k < K; ++k) sum += std::exp(row[k] - m);
    const double lse = m + std::log(sum);
    for (int64_t k = 0; k < K; ++k) out[k] = row[k] - lse;
}
}  // namespace

Tensor softmax(const Tensor& logits) {
    const int64_t N = logits.dim(0), K = logits.dim(1);
    Tensor p(logits.shape());
    std::vector<double> lp(static_cast<size_t>(K));
    for (int64_t n = 0; n < N; ++n) {
        log_softmax_row(logits.data() + n * K, K, lp.data());
        for (int64_t k = 0; k < K; ++k) p.at2(n, k) = std::exp(lp[static_cast<size_t>(k)]);
    }
    return p;
}

LossResult cross_entropy_mean(const Tensor& logits, const std::vector<int64_t>& labels) {
    const int64_t N = logits.dim(0), K = logits.dim(1);
    if (static_cast<int64_t>(labels.size()) != N)
        throw std::invalid_argument("cross_entropy_mean: label count mismatch");
    LossResult r;
    r.dlogits = Tensor(logits.shape());
    std::vector<double> lp(static_cast<size_t>(K));
    double total = 0.0;
    for (int64_t n = 0; n < N; ++n) {
        log_softmax_row(logits.data() + n * K, K, lp.data());
        const int64_t y = labels[static_cast<size_t>(n)];
        total += -lp[static_cast<size_t>(y)];
        for (int64_t k = 0; k < K; ++k) {
            const double p = std::exp(lp[static_cast<size_t>(k)]);
            r.dlogits.at2(n, k) = (p - (k == y ? 1.0 : 0.0)) / static_cast<double>(N);
        }
    }
    r.loss = total / static_cast<double>(N);
    return r;
}

LossResult cross_entropy_weighted(const Tensor& logits, const std::vector<int64_t>& labels,
                                  const std::vector<double>& weights, double denom) {
    const int64_t N = logits.dim(0), K = logits.dim(1);
    if (static_cast<int64_t>(labels.size()) != N ||
        static_cast<int64_t>(weights.size()) != N)
        throw std::invalid_argument("cross_entropy_weighted: size mismatch");
    LossResult r;
    r.dlogits = Tensor(logits.shape());
    std::vector<double> lp(static_cast<size_t>(K));
    double total = 0.0;
    for (int64_t n = 0; n < N; ++n) {
        const double w = weights[static_cast<size_t>(n)];
        log_softmax_row(logits.data() + n * K, K, lp.data());
        const int64_t y = labels[static_cast<size_t>(n)];
        total += w * -lp[static_cast<size_t>(y)];
        if (w == 0.0) continue;  // gradient rows stay exactly zero
        for (int64_t k = 0; k < K; ++k) {
            const double p = std::exp(lp[static_cast<size_t>(k)]);
            r.dlogits.at2(n, k) = w * (p - (k == y ? 1.0 : 0.0)) / denom;
        }
    }
    r.loss = total / denom;
    return r;
}

std::vector<double> cross_entropy_rows(const Tensor& logits,
                                       const std::vector<int64_t>& labels) {
    const int64_t N = logits.dim(0), K = logits.dim(1);
    std::vector<double> out(static_cast<size_t>(N));
    std::vector<double> lp(static_cast<size_t>(K));
    for (int64_t n = 0; n < N; ++n) {
        log_softmax_row(logits.data() + n * K, K, lp.data());
        out[static_cast<size_t>(n)] = -lp[static_cast<size_t>(labels[static_cast<size_t>(n)])];
    }
    return out;
}

std::vector<int64_t> argmax_rows(const Tensor& logits) {
    const int64_t N = logits.dim(0), K = logits.dim(1);
    std::vector<int64_t> out(static_cast<size_t>(N));
    for (int64_t n = 0; n < N; ++n) {
        int64_t best = 0;
        for (int64_t k = 1; k < K; ++k)
            if (logits.at2(n, k) > logits.at2(n, best)) best = k;
        out[static_cast<size_t>(n)] = best;
    }
    return out;
}

}  // namespace msmatch::nn
