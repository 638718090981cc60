// SPDX-License-Identifier: Apache-2.0
//
// FixMatch-style loop: supervised cross-entropy on weak views of the
// labeled batch, masked consistency loss between weak-view pseudo-labels
// and strong-view predictions, one Nesterov-SGD update per step.
//
// Determinism contract: every stochastic choice derives from
// (run seed, sample id, step, purpose), so two runs with the same config
// and partition produce bit-identical histories for any thread count.

#include "msmatch/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "msmatch/io/io.hpp"

namespace msmatch::train {

namespace {

constexpr uint64_t kTagAugment = 0xa06;
constexpr uint64_t kTagModelPass = 0x30d;
constexpr uint64_t kTagLabeledStream = 0x1ab;
constexpr uint64_t kTagUnlabeledStream = 0x01b;

enum PassId : uint64_t { kPassLabeled = 0, kPassWeak = 1, kPassStrong = 2 };

Rng sample_rng(const Pipeline& pipe, const data::ImageSample& s, int64_t step,
               uint64_t view) {
    return Rng::from_tags(Rng::mix(pipe.run_seed, kTagAugment), Rng::hash_str(s.id),
                          static_cast<uint64_t>(step), view);
}

// weak view -> normalized tensor rows of a batch
Tensor make_weak_batch(const std::vector<const data::ImageSample*>& batch,
                       const Pipeline& pipe, int64_t step, uint64_t view) {
    const int64_t N = static_cast<int64_t>(batch.size());
    const int64_t C = batch[0]->channels(), H = batch[0]->height(), W = batch[0]->width();
    Tensor out({N, C, H, W});
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < N; ++i) {
        Rng rng = sample_rng(pipe, *batch[static_cast<size_t>(i)], step, view);
        auto aug = augment::weak_augment(*batch[static_cast<size_t>(i)], rng);
        auto norm = data::normalize(aug, pipe.stats);
        std::copy(norm.pixels.data(), norm.pixels.data() + norm.pixels.numel(),
                  out.data() + i * C * H * W);
    }
    return out;
}

Tensor make_strong_batch(const std::vector<const data::ImageSample*>& batch,
                         const Pipeline& pipe, int64_t step) {
    const int64_t N = static_cast<int64_t>(batch.size());
    const int64_t C = batch[0]->channels(), H = batch[0]->height(), W = batch[0]->width();
    Tensor out({N, C, H, W});
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < N; ++i) {
        Rng rng = sample_rng(pipe, *batch[static_cast<size_t>(i)], step, kPassStrong);
        auto aug = augment::strong_augment(*batch[static_cast<size_t>(i)],
                                           pipe.strong_policy, rng, pipe.value_range);
        auto norm = data::normalize(aug, pipe.stats);
        std::copy(norm.pixels.data(), norm.pixels.data() + norm.pixels.numel(),
                  out.data() + i * C * H * W);
    }
    return out;
}

std::string batch_ids(const std::vector<const data::ImageSample*>& batch) {
    std::string ids;
    for (const auto* s : batch) ids += (ids.empty() ? "" : ", ") + s->id;
    return ids;
}

void ema_update(TrainState& state, double decay) {
    auto& params = state.model->parameters();
    if (state.ema.empty())
        for (const auto* p : params) state.ema.push_back(p->value);
    else
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor& shadow = state.ema[i];
            const Tensor& v = params[i]->value;
            for (int64_t j = 0; j < shadow.numel(); ++j)
                shadow[j] = decay * shadow[j] + (1.0 - decay) * v[j];
        }
}

struct EmaSwap {
    TrainState& state;
    bool active;
    std::vector<Tensor> saved;
    EmaSwap(TrainState& s, bool enable) : state(s), active(enable && !s.ema.empty()) {
        if (!active) return;
        auto& params = state.model->parameters();
        for (size_t i = 0; i < params.size(); ++i) {
            saved.push_back(params[i]->value);
            params[i]->value = state.ema[i];
        }
    }
    ~EmaSwap() {
        if (!active) return;
        auto& params = state.model->parameters();
        for (size_t i = 0; i < params.size(); ++i) params[i]->value = saved[i];
    }
};

}  // namespace

StepStats train_step(TrainState& state, const std::vector<const data::ImageSample*>& labeled,
                     const std::vector<const data::ImageSample*>& unlabeled,
                     const TrainConfig& cfg, const Pipeline& pipe) {
    if (labeled.empty()) throw std::invalid_argument("train_step: empty labeled batch");
    if (cfg.mode == TrainMode::supervised && !unlabeled.empty())
        throw std::invalid_argument("train_step: supervised mode takes no unlabeled batch");

    StepStats st;
    st.lr = schedule_lr(cfg, state.step);
    state.model->zero_grad();

    // supervised path
    {
        Tensor x = make_weak_batch(labeled, pipe, state.step, kPassLabeled);
        std::vector<int64_t> y;
        y.reserve(labeled.size());
        for (const auto* s : labeled) y.push_back(s->label);

        nn::RunCtx ctx;
        ctx.training = true;
        ctx.grad = true;
        ctx.update_running_stats = true;
        Rng drop = Rng::from_tags(Rng::mix(pipe.run_seed, kTagModelPass),
                                  static_cast<uint64_t>(state.step), kPassLabeled);
        ctx.rng = &drop;
        Tensor logits = state.model->forward(x, ctx);
        auto lr_sup = nn::cross_entropy_mean(logits, y);
        st.ls = lr_sup.loss;
        if (!std::isfinite(st.ls))
            throw std::runtime_error("non-finite supervised loss at step " +
                                     std::to_string(state.step) +
                                     "; labeled batch: " + batch_ids(labeled));
        state.model->backward(lr_sup.dlogits);
    }

    // consistency path
    if (cfg.mode == TrainMode::ssl && !unlabeled.empty()) {
        Tensor weak_logits;
        {
            Tensor xw = make_weak_batch(unlabeled, pipe, state.step, kPassWeak);
            nn::RunCtx ctx;  // stop-gradient: nothing cached on this pass
            ctx.training = true;
            ctx.grad = false;
            ctx.update_running_stats = false;
            Rng drop = Rng::from_tags(Rng::mix(pipe.run_seed, kTagModelPass),
                                      static_cast<uint64_t>(state.step), kPassWeak);
            ctx.rng = &drop;
            weak_logits = state.model->forward(xw, ctx);
        }
        PseudoLabels pl = pseudo_label(weak_logits, cfg.threshold);

        Tensor xs = make_strong_batch(unlabeled, pipe, state.step);
        nn::RunCtx ctx;
        ctx.training = true;
        ctx.grad = true;
        ctx.update_running_stats = false;
        Rng drop = Rng::from_tags(Rng::mix(pipe.run_seed, kTagModelPass),
                                  static_cast<uint64_t>(state.step), kPassStrong);
        ctx.rng = &drop;
        Tensor strong_logits = state.model->forward(xs, ctx);

        auto lu = nn::cross_entropy_weighted(strong_logits, pl.labels, pl.mask,
                                             static_cast<double>(unlabeled.size()));
        st.lu = lu.loss;
        if (!std::isfinite(st.lu))
            throw std::runtime_error("non-finite unsupervised loss at step " +
                                     std::to_string(state.step) +
                                     "; unlabeled batch: " + batch_ids(unlabeled));

        double survivors = 0.0, pseudo_hits = 0.0;
        for (size_t i = 0; i < pl.mask.size(); ++i) {
            survivors += pl.mask[i];
            if (pl.mask[i] > 0.0 && pl.labels[i] == unlabeled[i]->label)
                pseudo_hits += 1.0;  // diagnostic only; hidden labels never reach the loss
        }
        st.mask_rate = survivors / static_cast<double>(unlabeled.size());
        st.pseudo_acc = survivors > 0.0 ? pseudo_hits / survivors : 0.0;

        if (survivors > 0.0 && cfg.lambda_u != 0.0) {
            if (cfg.lambda_u != 1.0) nn::scale_inplace(lu.dlogits, cfg.lambda_u);
            state.model->backward(lu.dlogits);
        }
    }

    state.optimizer.step(state.model->parameters(), st.lr);
    if (cfg.ema_enabled) ema_update(state, cfg.ema_decay);

    HistoryRecord rec;
    rec.step = state.step;
    rec.ls = st.ls;
    rec.lu = st.lu;
    rec.mask_rate = st.mask_rate;
    rec.lr = st.lr;
    rec.pseudo_acc = st.pseudo_acc;
    state.history.push_back(rec);
    state.step += 1;
    return st;
}

std::vector<int64_t> predict(model::Classifier& model, const data::LabeledDataset& ds,
                             const data::ChannelStats& stats, int64_t batch) {
    std::vector<int64_t> preds;
    preds.reserve(static_cast<size_t>(ds.size()));
    const int64_t C = ds.samples[0].channels();
    const int64_t H = ds.samples[0].height(), W = ds.samples[0].width();
    for (int64_t start = 0; start < ds.size(); start += batch) {
        const int64_t n = std::min<int64_t>(batch, ds.size() - start);
        Tensor x({n, C, H, W});
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) {
            auto norm = data::normalize(ds.samples[static_cast<size_t>(start + i)], stats);
            std::copy(norm.pixels.data(), norm.pixels.data() + norm.pixels.numel(),
                      x.data() + i * C * H * W);
        }
        nn::RunCtx ctx;  // eval mode
        Tensor logits = model.forward(x, ctx);
        for (int64_t i : nn::argmax_rows(logits)) preds.push_back(i);
    }
    return preds;
}

double evaluate_accuracy(model::Classifier& model, const data::LabeledDataset& ds,
                         const data::ChannelStats& stats) {
    const auto preds = predict(model, ds, stats);
    int64_t hits = 0;
    for (int64_t i = 0; i < ds.size(); ++i)
        hits += preds[static_cast<size_t>(i)] == ds.samples[static_cast<size_t>(i)].label;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(ds.size());
}

namespace {

data::ChannelStats partition_stats(const data::SplitPartition& p) {
    // statistics over the full dataset (all three members), recorded in the
    // manifest by the caller
    const int64_t C = p.test.channels ? p.test.channels : p.train_labeled.channels;
    std::vector<double> sum(static_cast<size_t>(C), 0.0), sumsq(static_cast<size_t>(C), 0.0);
    int64_t count = 0;
    for (const data::LabeledDataset* ds : {&p.train_labeled, &p.train_unlabeled, &p.test})
        for (const auto& s : ds->samples) {
            const int64_t HW = s.height() * s.width();
            for (int64_t c = 0; c < C; ++c) {
                const double* plane = s.pixels.data() + c * HW;
                for (int64_t q = 0; q < HW; ++q) {
                    sum[static_cast<size_t>(c)] += plane[q];
                    sumsq[static_cast<size_t>(c)] += plane[q] * plane[q];
                }
            }
            count += HW;
        }
    data::ChannelStats stats;
    stats.mean.resize(static_cast<size_t>(C));
    stats.stddev.resize(static_cast<size_t>(C));
    for (int64_t c = 0; c < C; ++c) {
        const double m = sum[static_cast<size_t>(c)] / static_cast<double>(count);
        const double var = std::max(
            0.0, sumsq[static_cast<size_t>(c)] / static_cast<double>(count) - m * m);
        stats.mean[static_cast<size_t>(c)] = m;
        stats.stddev[static_cast<size_t>(c)] = std::max(std::sqrt(var), 1e-6);
    }
    return stats;
}

io::Checkpoint make_checkpoint(TrainState& state, uint64_t manifest_hash) {
    io::Checkpoint c;
    c.model_config_json = model::config_to_json(state.model->config());
    c.step = state.step;
    c.manifest_hash = manifest_hash;
    for (const auto* p : state.model->parameters())
        c.params.emplace_back(p->name, p->value);
    for (const auto* b : state.model->buffers())
        c.buffers.emplace_back(b->name, b->value);
    const auto& vel = state.optimizer.velocity();
    for (size_t i = 0; i < vel.size(); ++i)
        c.optimizer.emplace_back("velocity." + std::to_string(i), vel[i]);
    return c;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const model::ClassifierConfig& model_cfg,
                  const data::SplitPartition& partition, const TrainArtifacts& artifacts) {
    cfg.validate();
    model_cfg.validate();
    partition.train_labeled.validate();
    if (cfg.mode == TrainMode::ssl && partition.train_unlabeled.size() == 0)
        throw std::invalid_argument("train: ssl mode requires an unlabeled pool");
    for (int64_t n : partition.train_labeled.per_class_counts())
        if (n != cfg.n_labels_per_class)
            throw std::invalid_argument(
                "train: partition labeled counts disagree with n_labels_per_class");

    Pipeline pipe;
    pipe.stats = partition_stats(partition);
    pipe.value_range = partition.train_labeled.value_range;
    pipe.strong_policy.kind = partition.train_labeled.channels == 3
                                  ? augment::PolicyKind::strong_rgb
                                  : augment::PolicyKind::strong_ms;
    pipe.strong_policy.ops_per_image = cfg.strong_ops_per_image;
    pipe.run_seed = cfg.seed;

    TrainState state;
    state.model = model::build_classifier(model_cfg, cfg.seed);
    state.optimizer = SgdOptimizer(cfg.momentum, cfg.weight_decay);

    const int64_t n_lab = partition.train_labeled.size();
    const int64_t n_unl = partition.train_unlabeled.size();
    Rng lab_rng = Rng::from_tags(cfg.seed, kTagLabeledStream);
    std::vector<int64_t> unl_perm(static_cast<size_t>(std::max<int64_t>(n_unl, 0)));
    for (int64_t i = 0; i < n_unl; ++i) unl_perm[static_cast<size_t>(i)] = i;
    int64_t unl_cursor = 0;
    uint64_t unl_wraps = 0;
    if (n_unl > 0) {
        Rng r = Rng::from_tags(cfg.seed, kTagUnlabeledStream, unl_wraps);
        r.shuffle(unl_perm);
    }

    const int64_t total = cfg.total_steps();
    const int64_t mu_batch = cfg.batch_labeled * cfg.unlabeled_ratio;
    TrainResult result;
    double best_acc = -1.0;

    for (int64_t step = 0; step < total; ++step) {
        std::vector<const data::ImageSample*> labeled;
        labeled.reserve(static_cast<size_t>(cfg.batch_labeled));
        for (int64_t i = 0; i < cfg.batch_labeled; ++i)
            labeled.push_back(
                &partition.train_labeled.samples[static_cast<size_t>(lab_rng.uniform_int(n_lab))]);

        std::vector<const data::ImageSample*> unlabeled;
        if (cfg.mode == TrainMode::ssl && n_unl > 0 && mu_batch > 0) {
            unlabeled.reserve(static_cast<size_t>(mu_batch));
            for (int64_t i = 0; i < mu_batch; ++i) {
                if (unl_cursor == n_unl) {
                    unl_cursor = 0;
                    ++unl_wraps;
                    Rng r = Rng::from_tags(cfg.seed, kTagUnlabeledStream, unl_wraps);
                    r.shuffle(unl_perm);
                }
                unlabeled.push_back(
                    &partition.train_unlabeled
                         .samples[static_cast<size_t>(unl_perm[static_cast<size_t>(unl_cursor++)])]);
            }
        }

        train_step(state, labeled, unlabeled, cfg, pipe);

        if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0 && step + 1 < total) {
            EmaSwap swap(state, cfg.ema_enabled);
            const double acc = evaluate_accuracy(*state.model, partition.test, pipe.stats);
            state.history.back().test_acc = acc;
            if (acc > best_acc) {
                best_acc = acc;
                if (!artifacts.dir.empty())
                    io::save_checkpoint(artifacts.dir / "best.ckpt",
                                        make_checkpoint(state, artifacts.manifest_hash));
            }
        }
    }

    // final evaluation on the final model
    std::vector<int64_t> preds, truth;
    {
        EmaSwap swap(state, cfg.ema_enabled);
        preds = predict(*state.model, partition.test, pipe.stats);
    }
    for (const auto& s : partition.test.samples) truth.push_back(s.label);
    result.report = eval::compute_metrics(preds, truth, partition.test.num_classes(),
                                          partition.test.class_names);
    if (!state.history.empty()) state.history.back().test_acc = result.report.accuracy;
    best_acc = std::max(best_acc, result.report.accuracy);

    if (!artifacts.dir.empty()) {
        std::filesystem::create_directories(artifacts.dir);
        io::save_checkpoint(artifacts.dir / "final.ckpt",
                            make_checkpoint(state, artifacts.manifest_hash));
        std::string jsonl;
        for (const auto& rec : state.history)
            if (rec.step % cfg.log_every == 0 || rec.test_acc)
                jsonl += rec.to_jsonl() + "\n";
        io::write_text_atomic(artifacts.dir / "history.jsonl", jsonl);
        io::write_text_atomic(artifacts.dir / "report.json", eval::to_json(result.report));
        io::write_text_atomic(artifacts.dir / "report.csv", eval::to_csv(result.report));
        eval::write_confusion_heatmap(result.report,
                                      (artifacts.dir / "confusion.png").string());
    }

    result.history = std::move(state.history);
    result.best_test_acc = best_acc;
    result.steps_run = state.step;
    return result;
}

}  // namespace msmatch::train
