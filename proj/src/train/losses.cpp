// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <stdexcept>

#include "msmatch/train/trainer.hpp"

namespace msmatch::train {

std::string to_string(TrainMode m) { return m == TrainMode::ssl ? "ssl" : "supervised"; }

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "ssl") return TrainMode::ssl;
    if (s == "supervised") return TrainMode::supervised;
    throw std::invalid_argument("unknown train mode: " + s);
}

std::string to_string(LrSchedule s) {
    return s == LrSchedule::cosine ? "cosine" : "cosine_fixmatch";
}

LrSchedule lr_schedule_from_string(const std::string& s) {
    if (s == "cosine") return LrSchedule::cosine;
    if (s == "cosine_fixmatch") return LrSchedule::cosine_fixmatch;
    throw std::invalid_argument("unknown lr schedule: " + s);
}

void TrainConfig::validate() const {
    if (!(threshold > 0.0)) throw std::invalid_argument("threshold must be > 0");
    if (unlabeled_ratio < 0) throw std::invalid_argument("unlabeled_ratio must be >= 0");
    if (batch_labeled < 1) throw std::invalid_argument("batch_labeled must be >= 1");
    if (epochs < 1 || iters_per_epoch < 1)
        throw std::invalid_argument("epochs and iters_per_epoch must be >= 1");
    if (lr0 <= 0.0) throw std::invalid_argument("lr0 must be > 0");
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("momentum must be in [0,1)");
    if (n_labels_per_class < 1)
        throw std::invalid_argument("n_labels_per_class must be >= 1");
    if (lambda_u < 0.0) throw std::invalid_argument("lambda_u must be >= 0");
    if (strong_ops_per_image < 1)
        throw std::invalid_argument("strong_ops_per_image must be >= 1");
    if (log_every < 1) throw std::invalid_argument("log_every must be >= 1");
    if (eval_every < 0) throw std::invalid_argument("eval_every must be >= 0");
}

double supervised_loss(const Tensor& logits, const std::vector<int64_t>& labels) {
    return nn::cross_entropy_mean(logits, labels).loss;
}

PseudoLabels pseudo_label(const Tensor& weak_logits, double tau) {
    const Tensor probs = nn::softmax(weak_logits);
    const int64_t M = probs.dim(0), K = probs.dim(1);
    PseudoLabels out;
    out.labels.resize(static_cast<size_t>(M));
    out.mask.resize(static_cast<size_t>(M));
    for (int64_t i = 0; i < M; ++i) {
        int64_t arg = 0;
        double best = probs.at2(i, 0);
        for (int64_t k = 1; k < K; ++k)
            if (probs.at2(i, k) > best) {
                best = probs.at2(i, k);
                arg = k;
            }
        out.labels[static_cast<size_t>(i)] = arg;
        out.mask[static_cast<size_t>(i)] = best >= tau ? 1.0 : 0.0;
    }
    return out;
}

double unsupervised_loss(const Tensor& strong_logits, const std::vector<int64_t>& pseudo,
                         const std::vector<double>& mask) {
    const int64_t M = strong_logits.dim(0);
    return nn::cross_entropy_weighted(strong_logits, pseudo, mask,
                                      static_cast<double>(M))
        .loss;
}

double total_loss(double ls, double lu, TrainMode mode) {
    return mode == TrainMode::ssl ? ls + lu : ls;
}

double cosine_lr(int64_t step, int64_t total_steps, double lr0) {
    if (step < 0 || step > total_steps)
        throw std::invalid_argument("cosine_lr: step outside [0, total]");
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr0 * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
}

double cosine_lr_fixmatch(int64_t step, int64_t total_steps, double lr0) {
    if (step < 0 || step > total_steps)
        throw std::invalid_argument("cosine_lr_fixmatch: step outside [0, total]");
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr0 * std::cos(7.0 * 3.14159265358979323846 * frac / 16.0);
}

double schedule_lr(const TrainConfig& cfg, int64_t step) {
    return cfg.lr_schedule == LrSchedule::cosine
               ? cosine_lr(step, cfg.total_steps(), cfg.lr0)
               : cosine_lr_fixmatch(step, cfg.total_steps(), cfg.lr0);
}

void SgdOptimizer::step(const std::vector<nn::Param*>& params, double lr) {
    if (velocity_.empty()) {
        velocity_.reserve(params.size());
        for (const auto* p : params) velocity_.emplace_back(p->value.shape());
    }
    for (size_t i = 0; i < params.size(); ++i) {
        nn::Param& p = *params[i];
        Tensor& v = velocity_[i];
        const int64_t n = p.value.numel();
        for (int64_t j = 0; j < n; ++j) {
            const double g = p.grad[j] + weight_decay_ * p.value[j];
            v[j] = momentum_ * v[j] + g;
            p.value[j] -= lr * (g + momentum_ * v[j]);  // Nesterov look-ahead
        }
    }
}

std::string HistoryRecord::to_jsonl() const {
    char buf[320];
    if (test_acc)
        std::snprintf(buf, sizeof buf,
                      "{\"step\":%lld,\"Ls\":%.12g,\"Lu\":%.12g,\"mask_rate\":%.12g,"
                      "\"lr\":%.12g,\"pseudo_acc\":%.12g,\"test_acc\":%.12g}",
                      static_cast<long long>(step), ls, lu, mask_rate, lr, pseudo_acc,
                      *test_acc);
    else
        std::snprintf(buf, sizeof buf,
                      "{\"step\":%lld,\"Ls\":%.12g,\"Lu\":%.12g,\"mask_rate\":%.12g,"
                      "\"lr\":%.12g,\"pseudo_acc\":%.12g}",
                      static_cast<long long>(step), ls, lu, mask_rate, lr, pseudo_acc);
    return buf;
}

}  // namespace msmatch::train
