// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "msmatch/core/rng.hpp"
#include "msmatch/data/dataset.hpp"

namespace msmatch::augment {

enum class OpName {
    AutoContrast,
    Brightness,
    Color,
    Contrast,
    Equalize,
    Posterize,
    Rotate,
    Sharpness,
    ShearX,
    ShearY,
    Solarize,
    TranslateX,
    TranslateY,
};

std::string to_string(OpName name);

struct AugmentOp {
    OpName name;
    double lo = 0.0;   // parameter range; lo == hi == 0 for parameterless ops
    double hi = 0.0;
    bool ms_compatible = false;
};

/// The 13 strong ops with their parameter ranges. The three ops that assume
/// three display channels (AutoContrast, Brightness, Color) are the only
/// ones excluded from the multispectral set.
const std::vector<AugmentOp>& op_table();
const AugmentOp& op_entry(OpName name);

enum class PolicyKind { weak, strong_rgb, strong_ms };

struct AugmentPolicy {
    PolicyKind kind = PolicyKind::strong_rgb;
    int64_t ops_per_image = 3;

    std::vector<AugmentOp> eligible_ops() const;
};

std::string to_string(PolicyKind k);
PolicyKind policy_kind_from_string(const std::string& s);

/// Horizontal flip with probability 1/2 plus independent x/y translation of
/// up to 12.5% of the respective dimension (whole pixels, zero fill).
data::ImageSample weak_augment(const data::ImageSample& img, Rng& rng);

/// Draw ops_per_image distinct eligible ops, each with a uniformly sampled
/// magnitude from its parameter range, and apply them in draw order.
data::ImageSample strong_augment(const data::ImageSample& img, const AugmentPolicy& policy,
                                 Rng& rng, const data::ValueRange& range);

/// One op at a fixed magnitude; output is clamped to the declared range.
data::ImageSample apply_op(const data::ImageSample& img, const AugmentOp& op,
                           double magnitude, const data::ValueRange& range);

/// Serialized policy description for the run manifest.
std::string policy_json(const AugmentPolicy& policy);

}  // namespace msmatch::augment
