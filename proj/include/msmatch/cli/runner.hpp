// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "msmatch/cli/experiment.hpp"
#include "msmatch/eval/metrics.hpp"

namespace msmatch::cli {

struct SeedRun {
    uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::string dir;
    eval::MetricsReport report;
};

struct RunSummary {
    std::string run_dir;
    uint64_t config_hash = 0;
    std::vector<SeedRun> seeds;
    eval::MetricsReport aggregate;  // over completed seeds
    bool all_ok = false;
};

/// Split -> train -> report for every seed; persists manifests, checkpoints,
/// histories and reports under <output_dir>/<config-hash>/seed<k>/.
RunSummary run_train(const ExperimentConfig& cfg, bool quiet = false);

enum class SweepAxis { weight_decay, variant, n_labels };
SweepAxis sweep_axis_from_string(const std::string& s);
std::string to_string(SweepAxis a);

struct SweepCell {
    std::string value;
    bool ok = false;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    std::string run_dir;
    std::string error;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    bool all_ok = false;
    std::string table_csv;  // one row per metric, columns follow the axis values
    std::string csv_path;
};

SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis,
                      const std::vector<std::string>& values, bool quiet = false);

struct SaliencyRequest {
    std::string checkpoint;           // path to a .ckpt archive
    std::vector<std::string> ids;     // explicit sample ids; empty = first `count` test ids
    int64_t count = 4;
    std::string target = "predicted";  // "predicted" | "true" | class index
    std::string out_dir = "saliency";
};

int run_saliency(const ExperimentConfig& cfg, const SaliencyRequest& req);

/// Merge completed run directories (deduplicated by config hash) into
/// consolidated CSV tables, F1-versus-budget artifacts and heatmaps.
int run_report(const std::vector<std::string>& run_dirs, const std::string& out_dir,
               bool quiet = false);

}  // namespace msmatch::cli
