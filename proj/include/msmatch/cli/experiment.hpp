// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msmatch/data/dataset.hpp"
#include "msmatch/model/classifier.hpp"
#include "msmatch/train/trainer.hpp"

namespace msmatch::cli {

inline constexpr const char* kVersion = "0.1.0";

struct DatasetSpec {
    std::string kind = "synthetic";  // "folder" | "synthetic"
    std::string name = "synthetic";
    // folder datasets
    std::string root;
    std::string format = "rgb_image";  // "rgb_image" | "multiband_raster"
    std::optional<int64_t> resize_to;
    // synthetic datasets
    int64_t n_classes = 4;
    int64_t channels = 3;
    int64_t side = 16;
    int64_t per_class = 700;
    uint64_t generator_seed = 0;
};

struct SplitSpec {
    double test_fraction = 0.2;
    std::vector<uint64_t> seeds = {0, 1, 2};
};

/// One declarative experiment: dataset, split, optimization recipe, model.
/// Renders canonically (parse of a render reproduces the render).
struct ExperimentConfig {
    std::string name = "experiment";
    DatasetSpec dataset;
    SplitSpec split;
    train::TrainConfig train;
    std::string model_variant = "desk_tiny";
    double model_dropout = 0.0;
    std::string output_dir = "runs";
    std::optional<double> reference_accuracy;  // published value to display against

    void validate() const;  // field-level checks; throws std::invalid_argument
};

ExperimentConfig parse_experiment(const std::string& json_text);
std::string render_experiment(const ExperimentConfig& cfg);

/// Hash over the semantic sections (dataset, split, train, model); naming
/// and output location do not contribute.
uint64_t config_hash(const ExperimentConfig& cfg);

/// Resolve the dataset root against $MSMATCH_DATA_ROOT when set.
std::string resolved_root(const DatasetSpec& spec);

/// Load or synthesize the dataset described by the spec.
data::LabeledDataset load_dataset(const DatasetSpec& spec);

}  // namespace msmatch::cli
