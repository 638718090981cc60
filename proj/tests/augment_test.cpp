// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <set>

#include "msmatch/augment/augment.hpp"
#include "msmatch/core/rng.hpp"

using namespace msmatch;
using namespace msmatch::augment;
using data::ImageSample;
using data::ValueRange;

namespace {

ImageSample random_image(int64_t C, int64_t H, int64_t W, uint64_t seed,
                         const ValueRange& r = {0.0, 255.0}) {
    ImageSample s;
    s.pixels = Tensor({C, H, W});
    s.label = 2;
    s.id = "img";
    Rng rng(seed);
    for (int64_t i = 0; i < s.pixels.numel(); ++i) s.pixels[i] = rng.uniform(r.lo, r.hi);
    return s;
}

// 8-bit-valued image (all pixels on the 0..255 integer grid)
ImageSample eight_bit_image(int64_t C, int64_t H, int64_t W, uint64_t seed) {
    ImageSample s = random_image(C, H, W, seed);
    for (int64_t i = 0; i < s.pixels.numel(); ++i) s.pixels[i] = std::floor(s.pixels[i]);
    return s;
}

void check_equal(const Tensor& a, const Tensor& b, double tol = 1e-6) {
    REQUIRE(a.shape() == b.shape());
    for (int64_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol);
}

}  // namespace

TEST_CASE("op table matches the published parameter ranges") {
    const auto& t = op_table();
    REQUIRE(t.size() == 13);
    CHECK(op_entry(OpName::Brightness).lo == 0.05);
    CHECK(op_entry(OpName::Brightness).hi == 0.95);
    CHECK(op_entry(OpName::Posterize).lo == 4.0);
    CHECK(op_entry(OpName::Posterize).hi == 8.0);
    CHECK(op_entry(OpName::Rotate).lo == -30.0);
    CHECK(op_entry(OpName::Rotate).hi == 30.0);
    CHECK(op_entry(OpName::Solarize).hi == 256.0);
    CHECK(op_entry(OpName::ShearX).hi == 0.3);
    CHECK(op_entry(OpName::TranslateY).lo == -0.3);
    int ms_incompatible = 0;
    for (const auto& op : t)
        if (!op.ms_compatible) {
            ++ms_incompatible;
            const bool excluded = op.name == OpName::AutoContrast ||
                                  op.name == OpName::Brightness ||
                                  op.name == OpName::Color;
            CHECK(excluded);
        }
    CHECK(ms_incompatible == 3);
    AugmentPolicy ms{PolicyKind::strong_ms, 3};
    CHECK(ms.eligible_ops().size() == 10);
    AugmentPolicy rgb{PolicyKind::strong_rgb, 3};
    CHECK(rgb.eligible_ops().size() == 13);
}

TEST_CASE("weak augment: identity, involution, translation bound") {
    auto img = random_image(3, 16, 16, 1);

    // rng forcing no-flip + zero translation: bernoulli draw >= 0.5 and
    // tiny uniforms труncate to 0 -- craft via searching a seed
    bool found_identity = false, found_flip = false;
    for (uint64_t seed = 0; seed < 400 && !(found_identity && found_flip); ++seed) {
        Rng probe(seed);
        const bool flip = probe.bernoulli(0.5);
        const int64_t tx = static_cast<int64_t>(probe.uniform(-0.125, 0.125) * 16.0);
        const int64_t ty = static_cast<int64_t>(probe.uniform(-0.125, 0.125) * 16.0);
        if (!flip && tx == 0 && ty == 0 && !found_identity) {
            found_identity = true;
            Rng rng(seed);
            auto out = weak_augment(img, rng);
            check_equal(out.pixels, img.pixels, 0.0);
        }
        if (flip && tx == 0 && ty == 0 && !found_flip) {
            found_flip = true;
            Rng r1(seed), r2(seed);
            auto once = weak_augment(img, r1);
            // column reversed
            for (int64_t c = 0; c < 3; ++c)
                for (int64_t y = 0; y < 16; ++y)
                    for (int64_t x = 0; x < 16; ++x)
                        CHECK(once.pixels.at3(c, y, x) == img.pixels.at3(c, y, 15 - x));
            auto twice = weak_augment(once, r2);
            check_equal(twice.pixels, img.pixels, 0.0);
        }
    }
    CHECK(found_identity);
    CHECK(found_flip);

    // translation never exceeds floor(0.125 * dim) whole pixels; W = 10
    // makes the bound 1 while 0.125*W = 1.25
    auto img10 = random_image(1, 10, 10, 3);
    for (uint64_t seed = 0; seed < 10000; ++seed) {
        Rng rng(seed);
        auto out = weak_augment(img10, rng);
        // recover the shift from the zero-fill border: count fully-zero
        // leading/trailing columns is brittle; instead recompute the draw
        Rng probe(seed);
        probe.bernoulli(0.5);
        const int64_t tx = static_cast<int64_t>(probe.uniform(-0.125, 0.125) * 10.0);
        const int64_t ty = static_cast<int64_t>(probe.uniform(-0.125, 0.125) * 10.0);
        REQUIRE(std::abs(tx) <= 1);
        REQUIRE(std::abs(ty) <= 1);
        REQUIRE(out.pixels.numel() == img10.pixels.numel());
    }
}

TEST_CASE("weak augment preserves shape, label and id") {
    auto img = random_image(13, 12, 12, 7);
    Rng rng(5);
    auto out = weak_augment(img, rng);
    CHECK(out.pixels.shape() == img.pixels.shape());
    CHECK(out.label == img.label);
    CHECK(out.id == img.id);
}

TEST_CASE("neutral magnitudes are identities") {
    const ValueRange r{0.0, 255.0};
    for (int64_t C : {1LL, 3LL, 13LL}) {
        auto img = random_image(C, 12, 12, 100 + static_cast<uint64_t>(C));
        check_equal(apply_op(img, op_entry(OpName::Rotate), 0.0, r).pixels, img.pixels);
        check_equal(apply_op(img, op_entry(OpName::ShearX), 0.0, r).pixels, img.pixels);
        check_equal(apply_op(img, op_entry(OpName::ShearY), 0.0, r).pixels, img.pixels);
        check_equal(apply_op(img, op_entry(OpName::TranslateX), 0.0, r).pixels, img.pixels);
        check_equal(apply_op(img, op_entry(OpName::TranslateY), 0.0, r).pixels, img.pixels);
        check_equal(apply_op(img, op_entry(OpName::Posterize), 8.0, r).pixels, img.pixels);
        check_equal(apply_op(img, op_entry(OpName::Solarize), 256.0, r).pixels, img.pixels);
        // blend ops at weight 1 return the original (ranges exclude 1, so
        // probe the op semantics directly with a widened table entry)
        AugmentOp b{OpName::Brightness, 0.0, 1.0, false};
        check_equal(apply_op(img, b, 1.0, r).pixels, img.pixels);
        AugmentOp col{OpName::Color, 0.0, 1.0, false};
        check_equal(apply_op(img, col, 1.0, r).pixels, img.pixels);
        AugmentOp con{OpName::Contrast, 0.0, 1.0, true};
        check_equal(apply_op(img, con, 1.0, r).pixels, img.pixels);
        AugmentOp sh{OpName::Sharpness, 0.0, 1.0, true};
        check_equal(apply_op(img, sh, 1.0, r).pixels, img.pixels);
    }
}

TEST_CASE("solarize: zero threshold inverts and is an involution") {
    const ValueRange r{0.0, 255.0};
    auto img = random_image(3, 10, 10, 9);
    auto inv = apply_op(img, op_entry(OpName::Solarize), 0.0, r);
    for (int64_t i = 0; i < img.pixels.numel(); ++i)
        CHECK(inv.pixels[i] == doctest::Approx(255.0 - img.pixels[i]));
    auto back = apply_op(inv, op_entry(OpName::Solarize), 0.0, r);
    check_equal(back.pixels, img.pixels, 1e-9);
}

TEST_CASE("posterize on 8-bit data: 8 bits identity, 4 bits quantizes") {
    const ValueRange r{0.0, 255.0};
    auto img = eight_bit_image(3, 10, 10, 11);
    auto same = apply_op(img, op_entry(OpName::Posterize), 8.0, r);
    check_equal(same.pixels, img.pixels, 0.0);

    auto coarse = apply_op(img, op_entry(OpName::Posterize), 4.0, r);
    std::set<int> levels;
    for (int64_t i = 0; i < coarse.pixels.numel(); ++i)
        levels.insert(static_cast<int>(std::lround(coarse.pixels[i] / 255.0 * 255.0)));
    CHECK(levels.size() <= 16);
}

TEST_CASE("equalize: constant channel stays constant, spread flattens") {
    const ValueRange r{0.0, 255.0};
    ImageSample img;
    img.pixels = Tensor({2, 64, 64});
    img.label = 0;
    img.id = "eq";
    Rng rng(13);
    const int64_t HW = 64 * 64;
    for (int64_t p = 0; p < HW; ++p) img.pixels[p] = 42.0;  // channel 0 constant
    // channel 1: fine-grained but squashed into the low quarter of the range
    for (int64_t p = 0; p < HW; ++p)
        img.pixels[HW + p] = std::floor(rng.uniform() * 64.0);

    auto out = apply_op(img, op_entry(OpName::Equalize), 0.0, r);
    for (int64_t p = 0; p < HW; ++p) {
        CHECK(out.pixels[p] == out.pixels[0]);  // still constant
    }

    // flattening is measured coarser than the 256-level LUT: a value remap
    // cannot change a histogram at the LUT's own granularity (it can only
    // move or merge bins), so the chi-square is binned at 32
    auto chi2 = [&](const double* plane) {
        std::vector<double> hist(32, 0.0);
        for (int64_t p = 0; p < HW; ++p) {
            int bin = static_cast<int>(plane[p] / 256.0 * 32.0);
            hist[static_cast<size_t>(std::clamp(bin, 0, 31))] += 1.0;
        }
        const double expect = static_cast<double>(HW) / 32.0;
        double v = 0.0;
        for (double h : hist) v += (h - expect) * (h - expect) / expect;
        return v;
    };
    const double before = chi2(img.pixels.data() + HW);
    const double after = chi2(out.pixels.data() + HW);
    CHECK(after < before);
}

TEST_CASE("autocontrast maps channel extremes to the range ends") {
    const ValueRange r{0.0, 255.0};
    auto img = random_image(3, 10, 10, 17, {30.0, 200.0});
    auto out = apply_op(img, op_entry(OpName::AutoContrast), 0.0, r);
    for (int64_t c = 0; c < 3; ++c) {
        double mn = 1e300, mx = -1e300;
        for (int64_t p = 0; p < 100; ++p) {
            mn = std::min(mn, out.pixels[c * 100 + p]);
            mx = std::max(mx, out.pixels[c * 100 + p]);
        }
        CHECK(mn == doctest::Approx(0.0));
        CHECK(mx == doctest::Approx(255.0));
    }
}

TEST_CASE("every op preserves shape/label/id and range closure") {
    const ValueRange r{0.0, 255.0};
    Rng rng(23);
    for (int64_t C : {1LL, 3LL, 13LL}) {
        auto img = random_image(C, 9, 11, 200 + static_cast<uint64_t>(C));
        for (const auto& op : op_table()) {
            const double mag = rng.uniform(op.lo, op.hi);
            auto out = apply_op(img, op, mag, r);
            CHECK(out.pixels.shape() == img.pixels.shape());
            CHECK(out.label == img.label);
            CHECK(out.id == img.id);
            for (int64_t i = 0; i < out.pixels.numel(); ++i) {
                REQUIRE(out.pixels[i] >= r.lo);
                REQUIRE(out.pixels[i] <= r.hi);
                REQUIRE(std::isfinite(out.pixels[i]));
            }
        }
    }
}

TEST_CASE("geometric ops: per-channel equals joint application exactly") {
    const ValueRange r{0.0, 255.0};
    auto img = random_image(5, 12, 12, 31);
    for (OpName name : {OpName::Rotate, OpName::ShearX, OpName::ShearY,
                        OpName::TranslateX, OpName::TranslateY}) {
        const auto& op = op_entry(name);
        const double mag = 0.6 * op.hi;
        auto joint = apply_op(img, op, mag, r);
        for (int64_t c = 0; c < 5; ++c) {
            ImageSample single;
            single.pixels = Tensor({1, 12, 12});
            single.label = img.label;
            single.id = img.id;
            for (int64_t i = 0; i < 144; ++i) single.pixels[i] = img.pixels[c * 144 + i];
            auto out = apply_op(single, op, mag, r);
            for (int64_t i = 0; i < 144; ++i)
                REQUIRE(out.pixels[i] == joint.pixels[c * 144 + i]);
        }
    }
}

TEST_CASE("strong_ms never samples the display-only ops") {
    AugmentPolicy ms{PolicyKind::strong_ms, 3};
    auto img = random_image(13, 10, 10, 41);
    const ValueRange r{0.0, 255.0};
    // draw sequences only: replicate the sampler and check the op names
    for (uint64_t seed = 0; seed < 10000; ++seed) {
        Rng rng(seed);
        auto pool = ms.eligible_ops();
        for (int64_t i = 0; i < 3; ++i) {
            const int64_t j = i + rng.uniform_int(static_cast<int64_t>(pool.size()) - i);
            std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
            const auto name = pool[static_cast<size_t>(i)].name;
            REQUIRE(name != OpName::AutoContrast);
            REQUIRE(name != OpName::Brightness);
            REQUIRE(name != OpName::Color);
        }
    }
    // and the real sampler runs on 13 channels
    Rng rng(77);
    auto out = strong_augment(img, ms, rng, r);
    CHECK(out.pixels.dim(0) == 13);
}

TEST_CASE("strong augment: determinism and rgb channel precondition") {
    AugmentPolicy rgb{PolicyKind::strong_rgb, 3};
    const ValueRange r{0.0, 255.0};
    auto img = random_image(3, 12, 12, 51);
    Rng r1(9), r2(9);
    auto a = strong_augment(img, rgb, r1, r);
    auto b = strong_augment(img, rgb, r2, r);
    for (int64_t i = 0; i < a.pixels.numel(); ++i) REQUIRE(a.pixels[i] == b.pixels[i]);

    auto ms_img = random_image(13, 12, 12, 52);
    Rng r3(1);
    CHECK_THROWS_AS(strong_augment(ms_img, rgb, r3, r), std::invalid_argument);
}

TEST_CASE("magnitude outside the table range is fatal") {
    auto img = random_image(3, 10, 10, 61);
    CHECK_THROWS_AS(apply_op(img, op_entry(OpName::Rotate), 31.0, {0.0, 255.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_op(img, op_entry(OpName::Brightness), 0.96, {0.0, 255.0}),
                    std::invalid_argument);
}

TEST_CASE("policy serialization names every op") {
    AugmentPolicy ms{PolicyKind::strong_ms, 3};
    const std::string j = policy_json(ms);
    CHECK(j.find("strong_ms") != std::string::npos);
    CHECK(j.find("Solarize") != std::string::npos);
    CHECK(j.find("AutoContrast") == std::string::npos);
}
