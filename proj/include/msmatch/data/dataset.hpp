// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "msmatch/core/tensor.hpp"

namespace msmatch::data {

/// One image flowing through the pipeline: raw sensor/display units until
/// normalize() is applied, [C,H,W] layout.
struct ImageSample {
    Tensor pixels;
    int64_t label = 0;
    std::string id;

    int64_t channels() const { return pixels.dim(0); }
    int64_t height() const { return pixels.dim(1); }
    int64_t width() const { return pixels.dim(2); }
};

struct ValueRange {
    double lo = 0.0;
    double hi = 255.0;
};

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct LabeledDataset {
    std::vector<ImageSample> samples;
    std::vector<std::string> class_names;
    int64_t channels = 0;
    ValueRange value_range;
    std::optional<ChannelStats> channel_stats;

    int64_t size() const { return static_cast<int64_t>(samples.size()); }
    int64_t num_classes() const { return static_cast<int64_t>(class_names.size()); }
    std::vector<int64_t> per_class_counts() const;
    /// Enforces the structural invariants (uniform shape, labels in range,
    /// finite pixels, distinct class names). Throws on violation.
    void validate() const;
};

struct SplitPartition {
    LabeledDataset train_labeled;
    LabeledDataset train_unlabeled;  // ground truth retained for diagnostics only
    LabeledDataset test;
    uint64_t seed = 0;
};

enum class FolderFormat { rgb_image, multiband_raster };

/// Directory-per-class tree -> dataset. Class indices follow lexicographic
/// subdirectory order; files are decoded in parallel but returned in
/// deterministic (sorted) order.
LabeledDataset load_folder_dataset(const std::filesystem::path& root, FolderFormat format,
                                   std::optional<int64_t> resize_to = std::nullopt);

/// Deterministic parametric texture families, one per class; classes are
/// separable by shape/frequency/spectral profile but carry per-sample
/// nuisance (phase, brightness, jitter, noise) so no single pixel solves
/// the task.
LabeledDataset make_synthetic(int64_t n_classes, int64_t channels, int64_t side,
                              int64_t per_class, uint64_t seed);

/// Per class c with m_c samples, exactly round-half-up(fraction * m_c) go
/// to test via a seeded uniform draw.
std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds,
                                                           double test_fraction,
                                                           uint64_t seed);

/// Draw n_per_class labeled samples per class; the rest become the
/// unlabeled pool. The returned partition's `test` member is left empty.
SplitPartition select_labeled_subset(const LabeledDataset& train, int64_t n_per_class,
                                     uint64_t seed);

/// stratified_split + select_labeled_subset with a shared seed.
SplitPartition make_partition(const LabeledDataset& ds, double test_fraction,
                              int64_t n_per_class, uint64_t seed);

/// Per-channel mean and population standard deviation over every pixel of
/// every sample; the deviation is floored at 1e-6.
ChannelStats compute_normalization(const LabeledDataset& ds);

ImageSample normalize(const ImageSample& s, const ChannelStats& stats);
ImageSample denormalize(const ImageSample& s, const ChannelStats& stats);

/// Content hash over class names, ids, labels and pixel bits.
uint64_t dataset_hash(const LabeledDataset& ds);

/// JSON split manifest (dataset hash, seed, id lists, channel stats).
std::string split_manifest_json(const SplitPartition& p, uint64_t source_hash,
                                const std::optional<ChannelStats>& stats);

/// Bilinear resample of a [C,H,W] tensor to side x side (edge-clamped).
Tensor resize_bilinear(const Tensor& chw, int64_t out_h, int64_t out_w);

}  // namespace msmatch::data
