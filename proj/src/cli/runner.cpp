// SPDX-License-Identifier: Apache-2.0

#include "msmatch/cli/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "msmatch/augment/augment.hpp"
#include "msmatch/io/io.hpp"
#include "msmatch/saliency/guided.hpp"

namespace msmatch::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

model::ClassifierConfig model_config_for(const ExperimentConfig& cfg,
                                         const data::LabeledDataset& ds) {
    model::ClassifierConfig mc;
    mc.variant = model::variant_from_string(cfg.model_variant);
    mc.input_channels = ds.channels;
    mc.num_classes = ds.num_classes();
    mc.dropout = cfg.model_dropout;
    return mc;
}

augment::AugmentPolicy policy_for(const ExperimentConfig& cfg,
                                  const data::LabeledDataset& ds) {
    augment::AugmentPolicy p;
    p.kind = ds.channels == 3 ? augment::PolicyKind::strong_rgb
                              : augment::PolicyKind::strong_ms;
    p.ops_per_image = cfg.train.strong_ops_per_image;
    return p;
}

json seed_manifest(const ExperimentConfig& cfg, uint64_t chash, uint64_t dhash,
                   uint64_t seed, const data::ChannelStats& stats,
                   const augment::AugmentPolicy& policy) {
    json m;
    m["version"] = kVersion;
    m["name"] = cfg.name;
    m["seed"] = seed;
    m["config_hash"] = io::hash_hex(chash);
    m["dataset_hash"] = io::hash_hex(dhash);
    m["config"] = json::parse(render_experiment(cfg));
    m["augment_policy"] = json::parse(augment::policy_json(policy));
    m["channel_mean"] = stats.mean;
    m["channel_std"] = stats.stddev;
    m["files"] = {"split_manifest.json", "history.jsonl", "report.json",
                  "report.csv",          "confusion.png", "final.ckpt"};
    return m;
}

}  // namespace

RunSummary run_train(const ExperimentConfig& cfg, bool quiet) {
    cfg.validate();
    const data::LabeledDataset ds = load_dataset(cfg.dataset);
    const uint64_t dhash = data::dataset_hash(ds);
    const uint64_t chash = config_hash(cfg);

    RunSummary summary;
    summary.config_hash = chash;
    const fs::path run_dir = fs::path(cfg.output_dir) / io::hash_hex(chash);
    summary.run_dir = run_dir.string();
    fs::create_directories(run_dir);

    const data::ChannelStats stats = data::compute_normalization(ds);

    for (uint64_t seed : cfg.split.seeds) {
        SeedRun sr;
        sr.seed = seed;
        const fs::path seed_dir = run_dir / ("seed" + std::to_string(seed));
        sr.dir = seed_dir.string();
        try {
            fs::create_directories(seed_dir);
            auto partition = data::make_partition(ds, cfg.split.test_fraction,
                                                  cfg.train.n_labels_per_class, seed);
            const auto policy = policy_for(cfg, ds);
            const json manifest = seed_manifest(cfg, chash, dhash, seed, stats, policy);
            const std::string manifest_text = manifest.dump(2);
            io::write_text_atomic(seed_dir / "manifest.json", manifest_text);
            io::write_text_atomic(seed_dir / "split_manifest.json",
                                  data::split_manifest_json(partition, dhash, stats));

            train::TrainConfig tc = cfg.train;
            tc.seed = seed;
            train::TrainArtifacts artifacts;
            artifacts.dir = seed_dir;
            artifacts.manifest_hash = io::fnv1a(manifest_text);

            auto result = train::train(tc, model_config_for(cfg, ds), partition, artifacts);
            sr.report = result.report;
            sr.ok = true;
            if (!quiet)
                std::printf("[%s seed %llu] accuracy %.2f%% (best %.2f%%)\n",
                            cfg.name.c_str(), static_cast<unsigned long long>(seed),
                            result.report.accuracy, result.best_test_acc);
        } catch (const std::exception& e) {
            sr.ok = false;
            sr.error = e.what();
            if (!quiet)
                std::fprintf(stderr, "[%s seed %llu] FAILED: %s\n", cfg.name.c_str(),
                             static_cast<unsigned long long>(seed), e.what());
        }
        summary.seeds.push_back(std::move(sr));
    }

    std::vector<eval::MetricsReport> completed;
    for (const auto& sr : summary.seeds)
        if (sr.ok) completed.push_back(sr.report);
    summary.all_ok = completed.size() == summary.seeds.size();

    if (!completed.empty()) {
        summary.aggregate = eval::aggregate_seeds(completed);
        io::write_text_atomic(run_dir / "aggregate_report.json",
                              eval::to_json(summary.aggregate));
        io::write_text_atomic(run_dir / "aggregate_report.csv",
                              eval::to_csv(summary.aggregate));
        eval::write_confusion_heatmap(summary.aggregate,
                                      (run_dir / "aggregate_confusion.png").string());
        json rm;
        rm["version"] = kVersion;
        rm["name"] = cfg.name;
        rm["config_hash"] = io::hash_hex(chash);
        rm["dataset_hash"] = io::hash_hex(dhash);
        rm["config"] = json::parse(render_experiment(cfg));
        rm["completed_seeds"] = completed.size();
        rm["files"] = {"aggregate_report.json", "aggregate_report.csv",
                       "aggregate_confusion.png"};
        if (cfg.reference_accuracy) rm["reference_accuracy"] = *cfg.reference_accuracy;
        io::write_text_atomic(run_dir / "run_manifest.json", rm.dump(2));
        if (!quiet) {
            std::printf("[%s] mean accuracy %.2f%% +- %.2f%% over %zu seed(s)",
                        cfg.name.c_str(), summary.aggregate.accuracy,
                        summary.aggregate.stddev ? summary.aggregate.stddev->accuracy : 0.0,
                        completed.size());
            if (cfg.reference_accuracy)
                std::printf("  (published target %.2f%%, delta %+.2f)",
                            *cfg.reference_accuracy,
                            summary.aggregate.accuracy - *cfg.reference_accuracy);
            std::printf("\n");
        }
    }
    return summary;
}

SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "weight_decay") return SweepAxis::weight_decay;
    if (s == "variant") return SweepAxis::variant;
    if (s == "n_labels") return SweepAxis::n_labels;
    throw std::invalid_argument("unknown sweep axis: " + s +
                                " (expected weight_decay | variant | n_labels)");
}

std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::weight_decay: return "weight_decay";
        case SweepAxis::variant: return "variant";
        case SweepAxis::n_labels: return "n_labels";
    }
    return "?";
}

SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis,
                      const std::vector<std::string>& values, bool quiet) {
    if (values.empty()) throw std::invalid_argument("sweep: no axis values given");
    SweepResult result;
    for (const std::string& v : values) {
        SweepCell cell;
        cell.value = v;
        try {
            ExperimentConfig cfg = base;
            cfg.name = base.name + "_" + to_string(axis) + "_" + v;
            switch (axis) {
                case SweepAxis::weight_decay: cfg.train.weight_decay = std::stod(v); break;
                case SweepAxis::variant: cfg.model_variant = v; break;
                case SweepAxis::n_labels: cfg.train.n_labels_per_class = std::stoll(v); break;
            }
            cfg.validate();
            auto summary = run_train(cfg, quiet);
            if (summary.seeds.empty() || !summary.all_ok)
                throw std::runtime_error("one or more seeds failed");
            cell.ok = true;
            cell.mean_accuracy = summary.aggregate.accuracy;
            cell.std_accuracy =
                summary.aggregate.stddev ? summary.aggregate.stddev->accuracy : 0.0;
            cell.run_dir = summary.run_dir;
        } catch (const std::exception& e) {
            cell.ok = false;
            cell.error = e.what();
            if (!quiet)
                std::fprintf(stderr, "[sweep %s=%s] FAILED: %s\n",
                             to_string(axis).c_str(), v.c_str(), e.what());
        }
        result.cells.push_back(std::move(cell));
    }
    result.all_ok = true;
    for (const auto& c : result.cells) result.all_ok &= c.ok;

    // one column per axis value, accuracy as mean +- std
    std::string csv = to_string(axis);
    for (const auto& c : result.cells) csv += "," + c.value;
    csv += "\naccuracy";
    for (const auto& c : result.cells) {
        char buf[64];
        if (c.ok)
            std::snprintf(buf, sizeof buf, ",%.2f +- %.2f", c.mean_accuracy, c.std_accuracy);
        else
            std::snprintf(buf, sizeof buf, ",failed");
        csv += buf;
    }
    csv += "\n";
    result.table_csv = csv;

    const fs::path out = fs::path(base.output_dir) /
                         ("sweep_" + to_string(axis) + "_" +
                          io::hash_hex(config_hash(base)).substr(0, 8) + ".csv");
    fs::create_directories(out.parent_path());
    io::write_text_atomic(out, csv);
    result.csv_path = out.string();
    if (!quiet) std::fputs(csv.c_str(), stdout);
    return result;
}

int run_saliency(const ExperimentConfig& cfg, const SaliencyRequest& req) {
    const data::LabeledDataset ds = load_dataset(cfg.dataset);
    const data::ChannelStats stats = data::compute_normalization(ds);

    const io::Checkpoint ckpt = io::load_checkpoint(req.checkpoint);
    auto mc = model::config_from_json(ckpt.model_config_json);
    auto model = model::build_classifier(mc, 0);
    auto& params = model->parameters();
    if (params.size() != ckpt.params.size())
        throw std::runtime_error("checkpoint does not match the model architecture");
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = ckpt.params[i].second;
    auto& buffers = model->buffers();
    for (size_t i = 0; i < buffers.size(); ++i) buffers[i]->value = ckpt.buffers[i].second;

    std::vector<const data::ImageSample*> chosen;
    if (!req.ids.empty()) {
        for (const auto& id : req.ids) {
            const data::ImageSample* found = nullptr;
            for (const auto& s : ds.samples)
                if (s.id == id) {
                    found = &s;
                    break;
                }
            if (!found) throw std::invalid_argument("sample id not found: " + id);
            chosen.push_back(found);
        }
    } else {
        for (int64_t i = 0; i < std::min<int64_t>(req.count, ds.size()); ++i)
            chosen.push_back(&ds.samples[static_cast<size_t>(i)]);
    }

    fs::create_directories(req.out_dir);
    for (const auto* s : chosen) {
        const auto norm = data::normalize(*s, stats);
        int64_t target;
        if (req.target == "true") {
            target = s->label;
        } else if (req.target == "predicted") {
            Tensor x({1, norm.channels(), norm.height(), norm.width()});
            std::copy(norm.pixels.data(), norm.pixels.data() + norm.pixels.numel(),
                      x.data());
            nn::RunCtx ctx;
            Tensor logits = model->forward(x, ctx);
            target = nn::argmax_rows(logits)[0];
        } else {
            target = std::stoll(req.target);
        }
        auto map = saliency::guided_backprop(*model, norm, target);
        std::string stem = s->id;
        for (auto& ch : stem)
            if (ch == '/' || ch == '\\') ch = '_';
        stem += "_t" + std::to_string(target);
        saliency::write_saliency_png(map, fs::path(req.out_dir) / (stem + ".png"));
        saliency::write_saliency_npy(map, fs::path(req.out_dir) / (stem + ".npy"));
        std::printf("wrote %s (target %lld)\n",
                    (fs::path(req.out_dir) / (stem + ".png")).c_str(),
                    static_cast<long long>(target));
    }
    return 0;
}

}  // namespace msmatch::cli
