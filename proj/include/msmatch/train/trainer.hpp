// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "msmatch/augment/augment.hpp"
#include "msmatch/data/dataset.hpp"
#include "msmatch/eval/metrics.hpp"
#include "msmatch/model/classifier.hpp"
#include "msmatch/nn/loss.hpp"

namespace msmatch::train {

enum class TrainMode { ssl, supervised };
enum class LrSchedule { cosine, cosine_fixmatch };

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);
std::string to_string(LrSchedule s);
LrSchedule lr_schedule_from_string(const std::string& s);

struct TrainConfig {
    double lr0 = 0.03;
    double momentum = 0.9;          // Nesterov
    double weight_decay = 7.5e-4;   // coupled L2 term in the update
    int64_t batch_labeled = 32;     // B
    int64_t unlabeled_ratio = 7;    // mu; unlabeled batch is mu*B
    double threshold = 0.95;        // tau
    int64_t epochs = 500;
    int64_t iters_per_epoch = 1000;
    TrainMode mode = TrainMode::ssl;
    uint64_t seed = 0;
    int64_t n_labels_per_class = 5;
    double lambda_u = 1.0;          // unit weight is the contract
    LrSchedule lr_schedule = LrSchedule::cosine;
    bool ema_enabled = false;
    double ema_decay = 0.999;
    int64_t strong_ops_per_image = 3;
    int64_t log_every = 1;          // history record cadence
    int64_t eval_every = 0;         // steps between test evaluations; 0 = final only

    int64_t total_steps() const { return epochs * iters_per_epoch; }
    void validate() const;
};

// ---- the loss surface, one function per contract ----

/// Ls = (1/N) sum_i H(y_i, softmax(logits_i))
double supervised_loss(const Tensor& logits, const std::vector<int64_t>& labels);

struct PseudoLabels {
    std::vector<int64_t> labels;  // argmax of softmax(weak logits)
    std::vector<double> mask;     // 1 iff max softmax probability >= tau
};
/// Computed under stop-gradient; the caller never backpropagates through
/// the weak view.
PseudoLabels pseudo_label(const Tensor& weak_logits, double tau);

/// Lu = (1/M) sum_i mask_i * H(pseudo_i, softmax(strong_logits_i)); the
/// denominator is the full unlabeled batch size M.
double unsupervised_loss(const Tensor& strong_logits, const std::vector<int64_t>& pseudo,
                         const std::vector<double>& mask);

/// ssl: Ls + Lu; supervised: Ls.
double total_loss(double ls, double lu, TrainMode mode);

/// lr0 * (1 + cos(pi * step / total)) / 2
double cosine_lr(int64_t step, int64_t total_steps, double lr0);
/// the 7/16-cycle variant used by some consistency-training codebases
double cosine_lr_fixmatch(int64_t step, int64_t total_steps, double lr0);
double schedule_lr(const TrainConfig& cfg, int64_t step);

// ---- optimizer ----

/// SGD with Nesterov momentum; weight decay enters the update as an L2
/// gradient term.
class SgdOptimizer {
public:
    SgdOptimizer(double momentum, double weight_decay)
        : momentum_(momentum), weight_decay_(weight_decay) {}
    void step(const std::vector<nn::Param*>& params, double lr);
    const std::vector<Tensor>& velocity() const { return velocity_; }
    std::vector<Tensor>& velocity() { return velocity_; }

private:
    double momentum_, weight_decay_;
    std::vector<Tensor> velocity_;
};

// ---- the loop ----

struct HistoryRecord {
    int64_t step = 0;
    double ls = 0.0;
    double lu = 0.0;
    double mask_rate = 0.0;
    double lr = 0.0;
    double pseudo_acc = 0.0;  // diagnostic, against the hidden labels
    std::optional<double> test_acc;

    std::string to_jsonl() const;
};

struct TrainState {
    std::unique_ptr<model::Classifier> model;
    SgdOptimizer optimizer{0.9, 0.0};
    int64_t step = 0;
    std::vector<HistoryRecord> history;
    std::vector<Tensor> ema;  // shadow parameters when EMA is enabled
};

/// Everything a step needs besides the batches: normalization statistics,
/// the strong policy, the raw value range, and the run seed for deriving
/// per-sample generators.
struct Pipeline {
    data::ChannelStats stats;
    augment::AugmentPolicy strong_policy;
    data::ValueRange value_range;
    uint64_t run_seed = 0;
};

struct StepStats {
    double ls = 0.0, lu = 0.0, mask_rate = 0.0, pseudo_acc = 0.0, lr = 0.0;
};

/// One optimization step: weak-augmented supervised loss, pseudo-labeled
/// consistency loss on the strong views, one SGD update.
StepStats train_step(TrainState& state, const std::vector<const data::ImageSample*>& labeled,
                     const std::vector<const data::ImageSample*>& unlabeled,
                     const TrainConfig& cfg, const Pipeline& pipe);

std::vector<int64_t> predict(model::Classifier& model, const data::LabeledDataset& ds,
                             const data::ChannelStats& stats, int64_t batch = 128);

double evaluate_accuracy(model::Classifier& model, const data::LabeledDataset& ds,
                         const data::ChannelStats& stats);

struct TrainResult {
    eval::MetricsReport report;           // final-checkpoint metrics
    std::vector<HistoryRecord> history;
    double best_test_acc = 0.0;
    int64_t steps_run = 0;
};

struct TrainArtifacts {
    std::filesystem::path dir;  // empty: keep everything in memory only
    uint64_t manifest_hash = 0;
};

/// Full run over a partition: cycling streams, scheduled lr, cadenced
/// evaluation, checkpoint/history/report persistence. Reproducible given
/// (cfg, model_cfg, partition).
TrainResult train(const TrainConfig& cfg, const model::ClassifierConfig& model_cfg,
                  const data::SplitPartition& partition,
                  const TrainArtifacts& artifacts = {});

}  // namespace msmatch::train
