// SPDX-License-Identifier: Apache-2.0

#include "msmatch/cli/experiment.hpp"

#include <cstdlib>
#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "msmatch/io/io.hpp"

namespace msmatch::cli {

using nlohmann::json;

namespace {

json dataset_to_json(const DatasetSpec& d) {
    json j;
    j["kind"] = d.kind;
    j["name"] = d.name;
    if (d.kind == "folder") {
        j["root"] = d.root;
        j["format"] = d.format;
        if (d.resize_to)
            j["resize_to"] = *d.resize_to;
        else
            j["resize_to"] = nullptr;
    } else {
        j["n_classes"] = d.n_classes;
        j["channels"] = d.channels;
        j["side"] = d.side;
        j["per_class"] = d.per_class;
        j["generator_seed"] = d.generator_seed;
    }
    return j;
}

DatasetSpec dataset_from_json(const json& j) {
    DatasetSpec d;
    d.kind = j.at("kind").get<std::string>();
    d.name = j.at("name").get<std::string>();
    if (d.kind == "folder") {
        d.root = j.at("root").get<std::string>();
        d.format = j.at("format").get<std::string>();
        if (j.contains("resize_to") && !j.at("resize_to").is_null())
            d.resize_to = j.at("resize_to").get<int64_t>();
    } else if (d.kind == "synthetic") {
        d.n_classes = j.at("n_classes").get<int64_t>();
        d.channels = j.at("channels").get<int64_t>();
        d.side = j.at("side").get<int64_t>();
        d.per_class = j.at("per_class").get<int64_t>();
        d.generator_seed = j.at("generator_seed").get<uint64_t>();
    } else {
        throw std::invalid_argument("dataset.kind must be 'folder' or 'synthetic', got '" +
                                    d.kind + "'");
    }
    return d;
}

json train_to_json(const train::TrainConfig& t) {
    json j;
    j["lr0"] = t.lr0;
    j["momentum"] = t.momentum;
    j["weight_decay"] = t.weight_decay;
    j["batch_labeled"] = t.batch_labeled;
    j["unlabeled_ratio"] = t.unlabeled_ratio;
    j["threshold"] = t.threshold;
    j["epochs"] = t.epochs;
    j["iters_per_epoch"] = t.iters_per_epoch;
    j["mode"] = to_string(t.mode);
    j["n_labels_per_class"] = t.n_labels_per_class;
    j["lambda_u"] = t.lambda_u;
    j["lr_schedule"] = to_string(t.lr_schedule);
    j["ema_enabled"] = t.ema_enabled;
    j["ema_decay"] = t.ema_decay;
    j["strong_ops_per_image"] = t.strong_ops_per_image;
    j["log_every"] = t.log_every;
    j["eval_every"] = t.eval_every;
    return j;
}

train::TrainConfig train_from_json(const json& j) {
    train::TrainConfig t;
    t.lr0 = j.at("lr0").get<double>();
    t.momentum = j.at("momentum").get<double>();
    t.weight_decay = j.at("weight_decay").get<double>();
    t.batch_labeled = j.at("batch_labeled").get<int64_t>();
    t.unlabeled_ratio = j.at("unlabeled_ratio").get<int64_t>();
    t.threshold = j.at("threshold").get<double>();
    t.epochs = j.at("epochs").get<int64_t>();
    t.iters_per_epoch = j.at("iters_per_epoch").get<int64_t>();
    t.mode = train::train_mode_from_string(j.at("mode").get<std::string>());
    t.n_labels_per_class = j.at("n_labels_per_class").get<int64_t>();
    t.lambda_u = j.at("lambda_u").get<double>();
    t.lr_schedule = train::lr_schedule_from_string(j.at("lr_schedule").get<std::string>());
    t.ema_enabled = j.at("ema_enabled").get<bool>();
    t.ema_decay = j.at("ema_decay").get<double>();
    t.strong_ops_per_image = j.at("strong_ops_per_image").get<int64_t>();
    t.log_every = j.at("log_every").get<int64_t>();
    t.eval_every = j.at("eval_every").get<int64_t>();
    return t;
}

json semantic_json(const ExperimentConfig& cfg) {
    json j;
    j["dataset"] = dataset_to_json(cfg.dataset);
    j["split"]["test_fraction"] = cfg.split.test_fraction;
    j["split"]["seeds"] = cfg.split.seeds;
    j["train"] = train_to_json(cfg.train);
    j["model"]["variant"] = cfg.model_variant;
    j["model"]["dropout"] = cfg.model_dropout;
    return j;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (name.empty()) throw std::invalid_argument("config.name: must not be empty");
    if (split.seeds.empty()) throw std::invalid_argument("split.seeds: must not be empty");
    if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0))
        throw std::invalid_argument("split.test_fraction: must be in (0,1)");
    try {
        train.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("train.") + e.what());
    }
    model::variant_from_string(model_variant);
    if (model_dropout < 0.0 || model_dropout >= 1.0)
        throw std::invalid_argument("model.dropout: must be in [0,1)");
    if (dataset.kind == "folder") {
        const std::string root = resolved_root(dataset);
        if (!std::filesystem::is_directory(root))
            throw std::invalid_argument("dataset.root: not a directory: " + root);
        if (dataset.format != "rgb_image" && dataset.format != "multiband_raster")
            throw std::invalid_argument("dataset.format: unknown value " + dataset.format);
    } else if (dataset.kind == "synthetic") {
        if (dataset.n_classes < 2 || dataset.channels < 1 || dataset.side < 8 ||
            dataset.per_class < 2)
            throw std::invalid_argument("dataset: synthetic parameters out of range");
    } else {
        throw std::invalid_argument("dataset.kind: must be 'folder' or 'synthetic'");
    }
    if (output_dir.empty()) throw std::invalid_argument("output_dir: must not be empty");
}

ExperimentConfig parse_experiment(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        cfg.name = j.at("name").get<std::string>();
        cfg.dataset = dataset_from_json(j.at("dataset"));
        cfg.split.test_fraction = j.at("split").at("test_fraction").get<double>();
        cfg.split.seeds = j.at("split").at("seeds").get<std::vector<uint64_t>>();
        cfg.train = train_from_json(j.at("train"));
        cfg.model_variant = j.at("model").at("variant").get<std::string>();
        cfg.model_dropout = j.at("model").at("dropout").get<double>();
        cfg.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("reference_accuracy") && !j.at("reference_accuracy").is_null())
            cfg.reference_accuracy = j.at("reference_accuracy").get<double>();
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config field error: ") + e.what());
    }
    return cfg;
}

std::string render_experiment(const ExperimentConfig& cfg) {
    json j = semantic_json(cfg);
    j["name"] = cfg.name;
    j["output_dir"] = cfg.output_dir;
    if (cfg.reference_accuracy)
        j["reference_accuracy"] = *cfg.reference_accuracy;
    else
        j["reference_accuracy"] = nullptr;
    return j.dump(2);
}

uint64_t config_hash(const ExperimentConfig& cfg) {
    return io::fnv1a(semantic_json(cfg).dump());
}

std::string resolved_root(const DatasetSpec& spec) {
    const char* env = std::getenv("MSMATCH_DATA_ROOT");
    if (env && *env && !spec.root.empty() && spec.root.front() != '/')
        return std::string(env) + "/" + spec.root;
    return spec.root;
}

data::LabeledDataset load_dataset(const DatasetSpec& spec) {
    if (spec.kind == "synthetic")
        return data::make_synthetic(spec.n_classes, spec.channels, spec.side,
                                    spec.per_class, spec.generator_seed);
    const auto format = spec.format == "rgb_image" ? data::FolderFormat::rgb_image
                                                   : data::FolderFormat::multiband_raster;
    return data::load_folder_dataset(resolved_root(spec), format, spec.resize_to);
}

}  // namespace msmatch::cli
