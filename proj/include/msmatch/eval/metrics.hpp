// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace msmatch::eval {

/// Percent-scaled evaluation artifacts: accuracy, per-class
/// precision/recall/F1 with support, and a row-normalized confusion matrix.
struct MetricsReport {
    std::vector<std::string> class_names;
    double accuracy = 0.0;                       // percent
    std::vector<double> precision;               // percent, per class
    std::vector<double> recall;
    std::vector<double> f1;
    std::vector<double> support;                 // test samples per class
    std::vector<std::vector<double>> confusion;  // rows sum to ~100
    int64_t n_seeds = 1;
    bool zero_division = false;  // set when any precision/f1 denominator was 0

    struct Dispersion {
        double accuracy = 0.0;
        std::vector<double> precision, recall, f1;
        std::vector<std::vector<double>> confusion;
    };
    std::optional<Dispersion> stddev;  // across seeds; absent for single runs

    int64_t num_classes() const { return static_cast<int64_t>(class_names.size()); }
};

MetricsReport compute_metrics(const std::vector<int64_t>& pred,
                              const std::vector<int64_t>& truth, int64_t k,
                              const std::vector<std::string>& class_names);

/// Element-wise mean of every metric plus population standard deviation.
MetricsReport aggregate_seeds(const std::vector<MetricsReport>& reports);

/// class x budget matrix of mean F1; rows sorted by class name, columns
/// ascending by budget.
struct F1Table {
    std::vector<std::string> class_names;   // sorted
    std::vector<int64_t> budgets;           // ascending
    std::vector<std::vector<double>> f1;    // [class][budget]
};
F1Table f1_by_label_budget(const std::map<int64_t, MetricsReport>& by_budget);

std::string to_json(const MetricsReport& r);
MetricsReport report_from_json(const std::string& text);
std::string to_csv(const MetricsReport& r);
std::string to_csv(const F1Table& t);

/// Confusion-matrix heatmap; zero cells are left blank.
void write_confusion_heatmap(const MetricsReport& r, const std::string& png_path);
/// Per-class F1 against labeled-budget line chart.
void write_f1_budget_plot(const F1Table& t, const std::string& png_path);

}  // namespace msmatch::eval
