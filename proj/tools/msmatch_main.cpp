// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msmatch/cli/experiment.hpp"
#include "msmatch/cli/runner.hpp"
#include "msmatch/io/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitBadConfig = 2;

msmatch::cli::ExperimentConfig load_config(const std::string& path) {
    auto cfg = msmatch::cli::parse_experiment(msmatch::io::read_text(path));
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"msmatch: semi-supervised multispectral scene classification"};
    app.require_subcommand(1);

    std::string config_path;
    bool quiet = false;

    auto* train_cmd = app.add_subcommand("train", "run an experiment config end to end");
    train_cmd->add_option("-c,--config", config_path, "experiment config (json)")
        ->required();
    train_cmd->add_flag("-q,--quiet", quiet, "suppress progress output");

    std::string axis;
    std::vector<std::string> values;
    auto* sweep_cmd = app.add_subcommand("sweep", "run one config across an axis of values");
    sweep_cmd->add_option("-c,--config", config_path, "base experiment config (json)")
        ->required();
    sweep_cmd->add_option("-a,--axis", axis, "weight_decay | variant | n_labels")
        ->required();
    sweep_cmd->add_option("-v,--values", values, "axis values")->required();
    sweep_cmd->add_flag("-q,--quiet", quiet, "suppress progress output");

    std::vector<std::string> report_dirs;
    std::string report_out = "report";
    auto* report_cmd = app.add_subcommand("report", "merge completed runs into tables");
    report_cmd->add_option("dirs", report_dirs, "run directories (config-hash level)")
        ->required();
    report_cmd->add_option("-o,--out", report_out, "output directory");

    msmatch::cli::SaliencyRequest sreq;
    auto* sal_cmd = app.add_subcommand("saliency", "guided-backpropagation maps");
    sal_cmd->add_option("-c,--config", config_path, "experiment config (json)")->required();
    sal_cmd->add_option("--checkpoint", sreq.checkpoint, "checkpoint archive")->required();
    sal_cmd->add_option("--ids", sreq.ids, "sample ids (default: first N)");
    sal_cmd->add_option("--count", sreq.count, "number of samples when no ids given");
    sal_cmd->add_option("--target", sreq.target, "predicted | true | <class index>");
    sal_cmd->add_option("-o,--out", sreq.out_dir, "output directory");

    auto* validate_cmd =
        app.add_subcommand("validate-config", "parse, check and echo a config");
    validate_cmd->add_option("-c,--config", config_path, "experiment config (json)")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate_cmd->parsed()) {
            try {
                auto cfg = load_config(config_path);
                std::printf("%s\n", msmatch::cli::render_experiment(cfg).c_str());
                std::printf("config hash: %s\n",
                            msmatch::io::hash_hex(msmatch::cli::config_hash(cfg)).c_str());
                return kExitOk;
            } catch (const std::invalid_argument& e) {
                std::fprintf(stderr, "invalid config: %s\n", e.what());
                return kExitBadConfig;
            }
        }

        if (train_cmd->parsed()) {
            msmatch::cli::ExperimentConfig cfg;
            try {
                cfg = load_config(config_path);
            } catch (const std::invalid_argument& e) {
                std::fprintf(stderr, "invalid config: %s\n", e.what());
                return kExitBadConfig;
            }
            auto summary = msmatch::cli::run_train(cfg, quiet);
            if (!summary.all_ok) {
                for (const auto& sr : summary.seeds)
                    if (!sr.ok)
                        std::fprintf(stderr, "seed %llu failed: %s\n",
                                     static_cast<unsigned long long>(sr.seed),
                                     sr.error.c_str());
                return kExitRuntime;
            }
            return kExitOk;
        }

        if (sweep_cmd->parsed()) {
            msmatch::cli::ExperimentConfig cfg;
            try {
                cfg = load_config(config_path);
            } catch (const std::invalid_argument& e) {
                std::fprintf(stderr, "invalid config: %s\n", e.what());
                return kExitBadConfig;
            }
            auto result = msmatch::cli::run_sweep(
                cfg, msmatch::cli::sweep_axis_from_string(axis), values, quiet);
            return result.all_ok ? kExitOk : kExitRuntime;
        }

        if (report_cmd->parsed())
            return msmatch::cli::run_report(report_dirs, report_out);

        if (sal_cmd->parsed()) {
            msmatch::cli::ExperimentConfig cfg;
            try {
                cfg = load_config(config_path);
            } catch (const std::invalid_argument& e) {
                std::fprintf(stderr, "invalid config: %s\n", e.what());
                return kExitBadConfig;
            }
            return msmatch::cli::run_saliency(cfg, sreq);
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid request: %s\n", e.what());
        return kExitBadConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
