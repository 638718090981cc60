// SPDX-License-Identifier: Apache-2.0

#include <stdexcept>

#include <json.hpp>

#include "msmatch/augment/augment.hpp"

namespace msmatch::augment {

using data::ImageSample;
using data::ValueRange;

std::string to_string(OpName name) {
    switch (name) {
        case OpName::AutoContrast: return "AutoContrast";
        case OpName::Brightness: return "Brightness";
        case OpName::Color: return "Color";
        case OpName::Contrast: return "Contrast";
        case OpName::Equalize: return "Equalize";
        case OpName::Posterize: return "Posterize";
        case OpName::Rotate: return "Rotate";
        case OpName::Sharpness: return "Sharpness";
        case OpName::ShearX: return "ShearX";
        case OpName::ShearY: return "ShearY";
        case OpName::Solarize: return "Solarize";
        case OpName::TranslateX: return "TranslateX";
        case OpName::TranslateY: return "TranslateY";
    }
    return "?";
}

const std::vector<AugmentOp>& op_table() {
    static const std::vector<AugmentOp> table = {
        {OpName::AutoContrast, 0.0, 0.0, false},
        {OpName::Brightness, 0.05, 0.95, false},
        {OpName::Color, 0.05, 0.95, false},
        {OpName::Contrast, 0.05, 0.95, true},
        {OpName::Equalize, 0.0, 0.0, true},
        {OpName::Posterize, 4.0, 8.0, true},
        {OpName::Rotate, -30.0, 30.0, true},
        {OpName::Sharpness, 0.05, 0.95, true},
        {OpName::ShearX, -0.3, 0.3, true},
        {OpName::ShearY, -0.3, 0.3, true},
        {OpName::Solarize, 0.0, 256.0, true},
        {OpName::TranslateX, -0.3, 0.3, true},
        {OpName::TranslateY, -0.3, 0.3, true},
    };
    return table;
}

const AugmentOp& op_entry(OpName name) {
    for (const auto& op : op_table())
        if (op.name == name) return op;
    throw std::logic_error("op_entry: unknown op");
}

std::string to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::weak: return "weak";
        case PolicyKind::strong_rgb: return "strong_rgb";
        case PolicyKind::strong_ms: return "strong_ms";
    }
    return "?";
}

PolicyKind policy_kind_from_string(const std::string& s) {
    if (s == "weak") return PolicyKind::weak;
    if (s == "strong_rgb") return PolicyKind::strong_rgb;
    if (s == "strong_ms") return PolicyKind::strong_ms;
    throw std::invalid_argument("unknown augment policy: " + s);
}

std::vector<AugmentOp> AugmentPolicy::eligible_ops() const {
    std::vector<AugmentOp> ops;
    for (const auto& op : op_table())
        if (kind == PolicyKind::strong_rgb || op.ms_compatible) ops.push_back(op);
    return ops;
}

ImageSample weak_augment(const ImageSample& img, Rng& rng) {
    const int64_t C = img.channels(), H = img.height(), W = img.width();
    const bool flip = rng.bernoulli(0.5);
    // whole-pixel shifts: |trunc(u*W)| never exceeds floor(0.125*W)
    const int64_t tx = static_cast<int64_t>(rng.uniform(-0.125, 0.125) * static_cast<double>(W));
    const int64_t ty = static_cast<int64_t>(rng.uniform(-0.125, 0.125) * static_cast<double>(H));

    // flip first, then shift: out(x,y) = flipped(x - tx, y - ty), zero fill
    ImageSample out = img;
    out.pixels.fill(0.0);
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H; ++y) {
            const int64_t sy = y - ty;
            if (sy < 0 || sy >= H) continue;
            for (int64_t x = 0; x < W; ++x) {
                const int64_t sx = x - tx;
                if (sx < 0 || sx >= W) continue;
                out.pixels.at3(c, y, x) = img.pixels.at3(c, sy, flip ? W - 1 - sx : sx);
            }
        }
    return out;
}

ImageSample strong_augment(const ImageSample& img, const AugmentPolicy& policy, Rng& rng,
                           const ValueRange& range) {
    if (policy.kind == PolicyKind::weak)
        throw std::invalid_argument("strong_augment called with the weak policy");
    if (policy.kind == PolicyKind::strong_rgb && img.channels() != 3)
        throw std::invalid_argument("strong_rgb policy requires 3 channels, got " +
                                    std::to_string(img.channels()));

    std::vector<AugmentOp> pool = policy.eligible_ops();
    const int64_t n = std::min<int64_t>(policy.ops_per_image,
                                        static_cast<int64_t>(pool.size()));
    // partial Fisher-Yates: distinct ops in draw order
    for (int64_t i = 0; i < n; ++i) {
        const int64_t j = i + rng.uniform_int(static_cast<int64_t>(pool.size()) - i);
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    }

    ImageSample out = img;
    for (int64_t i = 0; i < n; ++i) {
        const AugmentOp& op = pool[static_cast<size_t>(i)];
        const double magnitude = rng.uniform(op.lo, op.hi);
        out = apply_op(out, op, magnitude, range);
    }
    return out;
}

std::string policy_json(const AugmentPolicy& policy) {
    nlohmann::json j;
    j["kind"] = to_string(policy.kind);
    j["ops_per_image"] = policy.ops_per_image;
    nlohmann::json ops = nlohmann::json::array();
    for (const auto& op : policy.eligible_ops()) {
        nlohmann::json o;
        o["name"] = to_string(op.name);
        o["lo"] = op.lo;
        o["hi"] = op.hi;
        o["ms_compatible"] = op.ms_compatible;
        ops.push_back(o);
    }
    j["ops"] = ops;
    return j.dump(2);
}

}  // namespace msmatch::augment
