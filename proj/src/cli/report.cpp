// SPDX-License-Identifier: Apache-2.0
//
// Consolidated reporting over completed run directories: an accuracy table,
// per-class metric tables, F1-versus-budget charts and confusion heatmaps.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "msmatch/cli/runner.hpp"
#include "msmatch/io/io.hpp"

namespace msmatch::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct LoadedRun {
    std::string name;
    std::string config_hash;
    std::string dir;
    int64_t n_labels = 0;
    std::string mode;
    std::string variant;
    std::string dataset_name;
    std::optional<double> reference;
    eval::MetricsReport aggregate;
};

LoadedRun load_run(const fs::path& dir) {
    const fs::path manifest_path = dir / "run_manifest.json";
    const fs::path report_path = dir / "aggregate_report.json";
    std::string missing;
    if (!fs::exists(manifest_path)) missing += " " + manifest_path.string();
    if (!fs::exists(report_path)) missing += " " + report_path.string();
    if (!missing.empty())
        throw std::runtime_error("run directory is missing artifacts:" + missing);

    const json m = json::parse(io::read_text(manifest_path));
    LoadedRun run;
    run.dir = dir.string();
    run.name = m.at("name").get<std::string>();
    run.config_hash = m.at("config_hash").get<std::string>();
    run.n_labels = m.at("config").at("train").at("n_labels_per_class").get<int64_t>();
    run.mode = m.at("config").at("train").at("mode").get<std::string>();
    run.variant = m.at("config").at("model").at("variant").get<std::string>();
    run.dataset_name = m.at("config").at("dataset").at("name").get<std::string>();
    if (m.contains("reference_accuracy"))
        run.reference = m.at("reference_accuracy").get<double>();
    run.aggregate = eval::report_from_json(io::read_text(report_path));
    return run;
}

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

int run_report(const std::vector<std::string>& run_dirs, const std::string& out_dir,
               bool quiet) {
    if (run_dirs.empty()) throw std::invalid_argument("report: no run directories given");

    std::vector<LoadedRun> runs;
    std::set<std::string> seen;
    for (const auto& d : run_dirs) {
        LoadedRun run = load_run(d);
        if (!seen.insert(run.config_hash).second) continue;  // deduplicated
        runs.push_back(std::move(run));
    }
    std::sort(runs.begin(), runs.end(), [](const LoadedRun& a, const LoadedRun& b) {
        return std::tie(a.dataset_name, a.mode, a.variant, a.n_labels) <
               std::tie(b.dataset_name, b.mode, b.variant, b.n_labels);
    });

    fs::create_directories(out_dir);

    // headline accuracy table
    std::string table =
        "name,dataset,mode,variant,n_labels,accuracy,std,reference,delta\n";
    for (const auto& r : runs) {
        table += r.name + "," + r.dataset_name + "," + r.mode + "," + r.variant + "," +
                 std::to_string(r.n_labels) + "," + fmt2(r.aggregate.accuracy) + "," +
                 fmt2(r.aggregate.stddev ? r.aggregate.stddev->accuracy : 0.0);
        if (r.reference) {
            table += "," + fmt2(*r.reference) + "," +
                     fmt2(r.aggregate.accuracy - *r.reference);
        } else {
            table += ",,";
        }
        table += "\n";
    }
    io::write_text_atomic(fs::path(out_dir) / "results_table.csv", table);
    if (!quiet) std::fputs(table.c_str(), stdout);

    // per-class tables and heatmaps per run
    for (const auto& r : runs) {
        io::write_text_atomic(fs::path(out_dir) / (r.name + "_per_class.csv"),
                              eval::to_csv(r.aggregate));
        eval::write_confusion_heatmap(
            r.aggregate, (fs::path(out_dir) / (r.name + "_confusion.png")).string());
    }

    // F1 against labeled budget for run families that differ only in budget
    std::map<std::string, std::map<int64_t, eval::MetricsReport>> families;
    for (const auto& r : runs)
        families[r.dataset_name + "_" + r.mode + "_" + r.variant][r.n_labels] =
            r.aggregate;
    for (const auto& [family, by_budget] : families) {
        if (by_budget.size() < 1) continue;
        const auto t = eval::f1_by_label_budget(by_budget);
        io::write_text_atomic(fs::path(out_dir) / ("f1_by_budget_" + family + ".csv"),
                              eval::to_csv(t));
        eval::write_f1_budget_plot(
            t, (fs::path(out_dir) / ("f1_by_budget_" + family + ".png")).string());
    }

    if (!quiet)
        std::printf("report written to %s (%zu unique run(s))\n", out_dir.c_str(),
                    runs.size());
    return 0;
}

}  // namespace msmatch::cli
