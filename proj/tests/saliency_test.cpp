// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "msmatch/core/rng.hpp"
#include "msmatch/saliency/guided.hpp"

using namespace msmatch;

namespace {

data::ImageSample random_sample(int64_t C, int64_t H, int64_t W, uint64_t seed) {
    data::ImageSample s;
    s.pixels = Tensor({C, H, W});
    s.label = 0;
    s.id = "sample";
    Rng rng(seed);
    for (int64_t i = 0; i < s.pixels.numel(); ++i) s.pixels[i] = rng.normal();
    return s;
}

std::unique_ptr<model::Classifier> linear_model(int64_t C, int64_t H, int64_t W,
                                                int64_t K, uint64_t seed) {
    auto seq = std::make_unique<nn::Sequential>();
    seq->add(std::make_unique<nn::Flatten>());
    seq->add(std::make_unique<nn::Linear>(C * H * W, K, true));
    model::ClassifierConfig cfg;
    cfg.input_channels = C;
    cfg.num_classes = K;
    cfg.variant = model::Variant::desk_tiny;  // descriptive only; net is custom
    cfg.dropout = 0.0;
    auto m = std::make_unique<model::Classifier>(cfg, std::move(seq));
    Rng rng(seed);
    for (auto* p : m->parameters())
        for (int64_t i = 0; i < p->value.numel(); ++i) p->value[i] = rng.normal();
    return m;
}

model::ClassifierConfig tiny_cfg() {
    model::ClassifierConfig cfg;
    cfg.variant = model::Variant::desk_tiny;
    cfg.input_channels = 3;
    cfg.num_classes = 4;
    cfg.dropout = 0.0;
    return cfg;
}

}  // namespace

TEST_CASE("guided map of a purely linear model equals its weight rows") {
    const int64_t C = 2, H = 6, W = 6, K = 3;
    auto m = linear_model(C, H, W, K, 3);
    auto sample = random_sample(C, H, W, 5);

    for (int64_t target = 0; target < K; ++target) {
        auto map = saliency::guided_backprop(*m, sample, target);
        REQUIRE(map.values.shape() == std::vector<int64_t>{C, H, W});
        const auto& weight = m->parameters()[0]->value;  // [K, CHW]
        for (int64_t i = 0; i < C * H * W; ++i)
            REQUIRE(std::abs(map.values[i] - weight.at2(target, i)) < 1e-6);
    }
}

TEST_CASE("guided rule holds at every rectifier of a random model") {
    auto m = model::build_classifier(tiny_cfg(), 17);
    auto sample = random_sample(3, 16, 16, 23);

    int observed = 0;
    bool all_ok = true;
    nn::set_rectifier_observer([&](const Tensor& propagated, const Tensor& output) {
        ++observed;
        for (int64_t i = 0; i < propagated.numel(); ++i) {
            if (propagated[i] < 0.0) all_ok = false;
            if (output[i] <= 0.0 && propagated[i] != 0.0) all_ok = false;
        }
    });
    auto map = saliency::guided_backprop(*m, sample, 1);
    nn::set_rectifier_observer(nullptr);

    CHECK(observed == 3);  // one per rectifier in the desk model
    CHECK(all_ok);
    for (int64_t i = 0; i < map.values.numel(); ++i) REQUIRE(std::isfinite(map.values[i]));
}

TEST_CASE("guided map differs from the vanilla gradient when negatives flow") {
    auto m = model::build_classifier(tiny_cfg(), 29);
    auto sample = random_sample(3, 16, 16, 31);

    auto guided = saliency::guided_backprop(*m, sample, 2);

    // vanilla input gradient of the same logit
    Tensor batch({1, 3, 16, 16});
    std::copy(sample.pixels.data(), sample.pixels.data() + sample.pixels.numel(),
              batch.data());
    nn::RunCtx ctx;
    ctx.grad = true;
    Tensor logits = m->forward(batch, ctx);
    Tensor gy(logits.shape());
    gy.at2(0, 2) = 1.0;
    Tensor vanilla = m->backward(gy);
    m->zero_grad();

    double max_diff = 0.0;
    for (int64_t i = 0; i < guided.values.numel(); ++i)
        max_diff = std::max(max_diff, std::abs(guided.values[i] - vanilla[i]));
    CHECK(max_diff > 1e-8);
}

TEST_CASE("saliency is deterministic and rejects bad targets") {
    auto m = model::build_classifier(tiny_cfg(), 41);
    auto sample = random_sample(3, 16, 16, 43);
    auto a = saliency::guided_backprop(*m, sample, 0);
    auto b = saliency::guided_backprop(*m, sample, 0);
    for (int64_t i = 0; i < a.values.numel(); ++i) REQUIRE(a.values[i] == b.values[i]);

    CHECK_THROWS_AS(saliency::guided_backprop(*m, sample, 4), std::invalid_argument);
    CHECK_THROWS_AS(saliency::guided_backprop(*m, sample, -1), std::invalid_argument);
}

TEST_CASE("saliency artifacts are written") {
    namespace fs = std::filesystem;
    auto m = model::build_classifier(tiny_cfg(), 47);
    auto sample = random_sample(3, 16, 16, 53);
    auto map = saliency::guided_backprop(*m, sample, 1);

    const fs::path dir = fs::temp_directory_path() / "msmatch_saliency_test";
    fs::create_directories(dir);
    saliency::write_saliency_png(map, dir / "map.png");
    saliency::write_saliency_npy(map, dir / "map.npy");
    CHECK(fs::exists(dir / "map.png"));
    CHECK(fs::file_size(dir / "map.npy") > 3ull * 16 * 16 * 8);
    fs::remove_all(dir);
}
