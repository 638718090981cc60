// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "msmatch/core/rng.hpp"
#include "msmatch/data/dataset.hpp"
#include "msmatch/nn/loss.hpp"
#include "msmatch/train/trainer.hpp"

using namespace msmatch;
using namespace msmatch::train;

namespace {

Tensor random_logits(int64_t n, int64_t k, Rng& rng, double scale = 3.0) {
    Tensor t({n, k});
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
    return t;
}

// scalar brute-force cross entropy of one row
double ce_row(const Tensor& logits, int64_t row, int64_t label) {
    const int64_t k = logits.dim(1);
    double denom = 0.0;
    for (int64_t j = 0; j < k; ++j) denom += std::exp(logits.at2(row, j));
    return -std::log(std::exp(logits.at2(row, label)) / denom);
}

model::ClassifierConfig tiny_cfg(int64_t channels = 3, int64_t classes = 4) {
    model::ClassifierConfig mc;
    mc.variant = model::Variant::desk_tiny;
    mc.input_channels = channels;
    mc.num_classes = classes;
    mc.dropout = 0.0;
    return mc;
}

TrainConfig desk_cfg(TrainMode mode, uint64_t seed = 0) {
    TrainConfig cfg;
    cfg.mode = mode;
    cfg.seed = seed;
    cfg.batch_labeled = 8;
    cfg.unlabeled_ratio = mode == TrainMode::ssl ? 4 : 0;
    cfg.epochs = 1;
    cfg.iters_per_epoch = 50;
    cfg.n_labels_per_class = 4;
    cfg.lr0 = 0.03;
    return cfg;
}

}  // namespace

TEST_CASE("loss oracles: 500 random tiny cases to 1e-10 relative") {
    Rng rng(2024);
    for (int rep = 0; rep < 500; ++rep) {
        const int64_t n = 1 + rng.uniform_int(8);
        const int64_t k = 2 + rng.uniform_int(4);
        Tensor logits = random_logits(n, k, rng);
        std::vector<int64_t> labels;
        for (int64_t i = 0; i < n; ++i) labels.push_back(rng.uniform_int(k));

        // Eq. (1): mean cross-entropy
        double expected = 0.0;
        for (int64_t i = 0; i < n; ++i) expected += ce_row(logits, i, labels[i]);
        expected /= static_cast<double>(n);
        const double got = supervised_loss(logits, labels);
        REQUIRE(std::abs(got - expected) <= 1e-10 * std::max(1.0, std::abs(expected)));

        // Eq. (2): masked sum over the full batch size
        std::vector<double> mask;
        for (int64_t i = 0; i < n; ++i)
            mask.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
        double expected_u = 0.0;
        for (int64_t i = 0; i < n; ++i)
            expected_u += mask[static_cast<size_t>(i)] * ce_row(logits, i, labels[i]);
        expected_u /= static_cast<double>(n);
        const double got_u = unsupervised_loss(logits, labels, mask);
        REQUIRE(std::abs(got_u - expected_u) <= 1e-10 * std::max(1.0, std::abs(expected_u)));
    }
}

TEST_CASE("supervised loss analytic cases") {
    // uniform logits, K = 10 -> ln 10
    Tensor uniform({3, 10});
    CHECK(supervised_loss(uniform, {0, 5, 9}) ==
          doctest::Approx(std::log(10.0)).epsilon(1e-12));

    // probability ~1 on the true class -> loss ~0
    Tensor confident({2, 4});
    confident.fill(-40.0);
    confident.at2(0, 1) = 40.0;
    confident.at2(1, 3) = 40.0;
    CHECK(supervised_loss(confident, {1, 3}) == doctest::Approx(0.0).epsilon(1e-12));

    // mean contract: N=2 with per-sample losses a and b -> (a+b)/2
    Rng rng(7);
    Tensor two = random_logits(2, 5, rng);
    const double a = ce_row(two, 0, 2), b = ce_row(two, 1, 4);
    CHECK(supervised_loss(two, {2, 4}) == doctest::Approx((a + b) / 2.0).epsilon(1e-12));
}

TEST_CASE("pseudo labels: argmax and threshold semantics") {
    Tensor logits({2, 2});
    // softmax row 0 = [0.96, 0.04]; row 1 = [0.5, 0.5]
    logits.at2(0, 0) = std::log(0.96);
    logits.at2(0, 1) = std::log(0.04);
    logits.at2(1, 0) = 0.0;
    logits.at2(1, 1) = 0.0;
    auto pl = pseudo_label(logits, 0.95);
    CHECK(pl.labels[0] == 0);
    CHECK(pl.mask[0] == 1.0);
    CHECK(pl.mask[1] == 0.0);

    auto all = pseudo_label(logits, 0.0);
    CHECK(all.mask[0] == 1.0);
    CHECK(all.mask[1] == 1.0);

    auto none = pseudo_label(logits, 0.96 * 1.0001);
    CHECK(none.mask[0] == 0.0);
    CHECK(none.mask[1] == 0.0);
}

TEST_CASE("unsupervised loss denominator contract") {
    Rng rng(42);
    Tensor logits = random_logits(6, 3, rng);
    std::vector<int64_t> pseudo = {0, 1, 2, 0, 1, 2};

    // all masks zero -> exactly zero
    CHECK(unsupervised_loss(logits, pseudo, {0, 0, 0, 0, 0, 0}) == 0.0);

    // one of two rows masked with per-row CE value a -> a/2
    Tensor pair = random_logits(2, 4, rng);
    const double a = ce_row(pair, 0, 1);
    CHECK(unsupervised_loss(pair, {1, 3}, {1.0, 0.0}) ==
          doctest::Approx(a / 2.0).epsilon(1e-12));

    // strong logits matching pseudo-labels one-hot: loss ~ 0
    Tensor match({3, 4});
    match.fill(-30.0);
    match.at2(0, 2) = 30.0;
    match.at2(1, 0) = 30.0;
    match.at2(2, 1) = 30.0;
    CHECK(unsupervised_loss(match, {2, 0, 1}, {1, 1, 1}) ==
          doctest::Approx(0.0).epsilon(1e-12));

    // Lu = (survivors/M) * mean surviving CE
    std::vector<double> mask = {1, 0, 1, 1, 0, 0};
    double surv_sum = ce_row(logits, 0, 0) + ce_row(logits, 2, 2) + ce_row(logits, 3, 0);
    CHECK(unsupervised_loss(logits, pseudo, mask) ==
          doctest::Approx((3.0 / 6.0) * (surv_sum / 3.0)).epsilon(1e-12));
}

TEST_CASE("total loss composition") {
    CHECK(total_loss(1.0, 0.5, TrainMode::ssl) == 1.5);
    CHECK(total_loss(1.0, 0.5, TrainMode::supervised) == 1.0);
    CHECK(total_loss(0.0, 0.0, TrainMode::ssl) == 0.0);
}

TEST_CASE("cosine schedule endpoints and monotonicity") {
    CHECK(cosine_lr(0, 1000, 0.03) == doctest::Approx(0.03).epsilon(1e-15));
    CHECK(cosine_lr(500, 1000, 0.03) == doctest::Approx(0.015).epsilon(1e-12));
    CHECK(cosine_lr(1000, 1000, 0.03) == doctest::Approx(0.0).epsilon(1e-15));
    double prev = 1e9;
    for (int64_t s = 0; s <= 5000; ++s) {
        const double lr = cosine_lr(s, 5000, 0.03);
        REQUIRE(lr <= prev);
        prev = lr;
    }
    CHECK_THROWS_AS(cosine_lr(-1, 10, 0.03), std::invalid_argument);
    CHECK_THROWS_AS(cosine_lr(11, 10, 0.03), std::invalid_argument);
}

TEST_CASE("masking exactness: unreachable threshold equals supervised, bit for bit") {
    auto ds = data::make_synthetic(4, 3, 16, 30, 3);
    auto part = data::make_partition(ds, 0.2, 4, 3);

    auto run_steps = [&](TrainMode mode, double tau) {
        TrainConfig cfg = desk_cfg(mode, 7);
        cfg.threshold = tau;
        Pipeline pipe;
        pipe.stats = data::compute_normalization(ds);
        pipe.strong_policy = {augment::PolicyKind::strong_rgb, 3};
        pipe.value_range = ds.value_range;
        pipe.run_seed = cfg.seed;

        TrainState state;
        state.model = model::build_classifier(tiny_cfg(), cfg.seed);
        state.optimizer = SgdOptimizer(cfg.momentum, cfg.weight_decay);

        std::vector<const data::ImageSample*> labeled, unlabeled;
        for (int64_t i = 0; i < 8; ++i)
            labeled.push_back(&part.train_labeled.samples[static_cast<size_t>(i % part.train_labeled.size())]);
        if (mode == TrainMode::ssl)
            for (int64_t i = 0; i < 32; ++i)
                unlabeled.push_back(&part.train_unlabeled.samples[static_cast<size_t>(i)]);

        for (int step = 0; step < 3; ++step) {
            auto st = train_step(state, labeled, unlabeled, cfg, pipe);
            if (mode == TrainMode::ssl) {
                CHECK(st.lu == 0.0);
                CHECK(st.mask_rate == 0.0);
            }
        }
        return state.model->parameter_vector();
    };

    auto ssl_params = run_steps(TrainMode::ssl, 2.0);
    auto sup_params = run_steps(TrainMode::supervised, 2.0);
    REQUIRE(ssl_params.size() == sup_params.size());
    for (size_t i = 0; i < ssl_params.size(); ++i)
        REQUIRE(ssl_params[i] == sup_params[i]);
}

TEST_CASE("stop-gradient: the weak view leaves no backward graph") {
    auto m = model::build_classifier(tiny_cfg(), 5);
    Tensor x({2, 3, 16, 16});
    Rng rng(3);
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = rng.normal();

    nn::RunCtx ctx;
    ctx.training = true;
    ctx.grad = false;  // pseudo-label pass
    Tensor logits = m->forward(x, ctx);
    Tensor gy(logits.shape());
    gy.fill(1.0);
    CHECK_THROWS_AS(m->backward(gy), std::logic_error);
}

TEST_CASE("training loss decreases on the synthetic dataset") {
    auto ds = data::make_synthetic(4, 3, 16, 60, 1);
    auto part = data::make_partition(ds, 0.2, 40, 1);

    TrainConfig cfg = desk_cfg(TrainMode::supervised, 11);
    cfg.epochs = 4;
    cfg.iters_per_epoch = 50;  // 200 steps
    cfg.n_labels_per_class = 40;

    auto result = train::train(cfg, tiny_cfg(), part);
    REQUIRE(result.steps_run == 200);
    auto avg = [&](int64_t center) {
        double s = 0.0;
        int64_t n = 0;
        for (int64_t i = std::max<int64_t>(0, center - 9); i <= center; ++i, ++n)
            s += result.history[static_cast<size_t>(i)].ls;
        return s / static_cast<double>(n);
    };
    MESSAGE("Ls avg@10: " << avg(10) << "  avg@199: " << avg(199));
    CHECK(avg(199) < avg(10));
}

TEST_CASE("two identical runs produce identical history streams") {
    auto ds = data::make_synthetic(3, 3, 16, 30, 5);
    auto part = data::make_partition(ds, 0.2, 4, 5);

    TrainConfig cfg = desk_cfg(TrainMode::ssl, 13);
    cfg.epochs = 1;
    cfg.iters_per_epoch = 12;
    cfg.eval_every = 5;

    auto r1 = train::train(cfg, tiny_cfg(3, 3), part);
    auto r2 = train::train(cfg, tiny_cfg(3, 3), part);
    REQUIRE(r1.history.size() == r2.history.size());
    for (size_t i = 0; i < r1.history.size(); ++i)
        REQUIRE(r1.history[i].to_jsonl() == r2.history[i].to_jsonl());
    CHECK(r1.report.accuracy == r2.report.accuracy);
}

TEST_CASE("full-scale step arithmetic") {
    TrainConfig eurosat;
    eurosat.epochs = 500;
    eurosat.iters_per_epoch = 1000;
    CHECK(eurosat.total_steps() == 500000);

    TrainConfig ucm;
    ucm.batch_labeled = 16;
    ucm.unlabeled_ratio = 4;
    ucm.epochs = 1000;
    ucm.iters_per_epoch = 1000;
    CHECK(ucm.total_steps() == 1000000);
}

TEST_CASE("ssl smoke run: masks move and history is well formed") {
    auto ds = data::make_synthetic(3, 3, 16, 40, 21);
    auto part = data::make_partition(ds, 0.25, 4, 21);

    TrainConfig cfg = desk_cfg(TrainMode::ssl, 2);
    cfg.epochs = 1;
    cfg.iters_per_epoch = 30;
    cfg.threshold = 0.6;

    auto result = train::train(cfg, tiny_cfg(3, 3), part);
    REQUIRE(result.history.size() == 30);
    for (const auto& rec : result.history) {
        REQUIRE(rec.mask_rate >= 0.0);
        REQUIRE(rec.mask_rate <= 1.0);
        REQUIRE(std::isfinite(rec.ls));
        REQUIRE(std::isfinite(rec.lu));
        REQUIRE(rec.lr <= cfg.lr0);
    }
    // threshold monotonicity across the run: some step eventually passes
    bool any_mask = false;
    for (const auto& rec : result.history) any_mask |= rec.mask_rate > 0.0;
    CHECK(any_mask);
}

TEST_CASE("a small supervised run learns the synthetic task") {
    // generator calibration counterpart to the linear-probe bound
    auto ds = data::make_synthetic(4, 3, 16, 600, 0);
    auto part = data::make_partition(ds, 0.2, 480, 0);

    TrainConfig cfg = desk_cfg(TrainMode::supervised, 1);
    cfg.batch_labeled = 32;
    cfg.epochs = 5;
    cfg.iters_per_epoch = 100;
    cfg.n_labels_per_class = 480;
    cfg.lr0 = 0.03;

    auto result = train::train(cfg, tiny_cfg(), part);
    MESSAGE("fully supervised synthetic accuracy: " << result.report.accuracy);
    CHECK(result.report.accuracy >= 95.0);
}
