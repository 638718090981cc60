// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include <json.hpp>

#include "msmatch/cli/experiment.hpp"
#include "msmatch/cli/runner.hpp"
#include "msmatch/io/io.hpp"

using namespace msmatch;
using namespace msmatch::cli;
namespace fs = std::filesystem;

namespace {

ExperimentConfig desk_config(const fs::path& out, const std::string& mode = "ssl") {
    ExperimentConfig cfg;
    cfg.name = "cli_test_" + mode;
    cfg.dataset.kind = "synthetic";
    cfg.dataset.name = "synthetic3";
    cfg.dataset.n_classes = 3;
    cfg.dataset.channels = 3;
    cfg.dataset.side = 16;
    cfg.dataset.per_class = 40;
    cfg.dataset.generator_seed = 7;
    cfg.split.test_fraction = 0.25;
    cfg.split.seeds = {0, 1, 2};
    cfg.train.mode = train::train_mode_from_string(mode);
    cfg.train.batch_labeled = 4;
    cfg.train.unlabeled_ratio = mode == "ssl" ? 2 : 0;
    cfg.train.epochs = 1;
    cfg.train.iters_per_epoch = 8;
    cfg.train.n_labels_per_class = 4;
    cfg.train.eval_every = 0;
    cfg.model_variant = "desk_tiny";
    cfg.model_dropout = 0.0;
    cfg.output_dir = out.string();
    return cfg;
}

}  // namespace

TEST_CASE("experiment config: canonical render round trip") {
    ExperimentConfig cfg = desk_config("/tmp/x");
    const std::string rendered = render_experiment(cfg);
    auto back = parse_experiment(rendered);
    CHECK(render_experiment(back) == rendered);
    CHECK(back.name == cfg.name);
    CHECK(back.train.batch_labeled == 4);
    CHECK(back.split.seeds == cfg.split.seeds);
}

TEST_CASE("config hash tracks semantic fields only") {
    ExperimentConfig cfg = desk_config("/tmp/x");
    const uint64_t h0 = config_hash(cfg);

    ExperimentConfig renamed = cfg;
    renamed.name = "other_name";
    renamed.output_dir = "elsewhere";
    CHECK(config_hash(renamed) == h0);

    ExperimentConfig lr = cfg;
    lr.train.lr0 = 0.02;
    CHECK(config_hash(lr) != h0);

    ExperimentConfig seeds = cfg;
    seeds.split.seeds = {0, 1};
    CHECK(config_hash(seeds) != h0);

    ExperimentConfig variant = cfg;
    variant.model_variant = "B0";
    CHECK(config_hash(variant) != h0);
}

TEST_CASE("config validation rejects bad fields with field-level messages") {
    ExperimentConfig cfg = desk_config("/tmp/x");

    ExperimentConfig bad = cfg;
    bad.split.test_fraction = 1.5;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("test_fraction"),
                         std::invalid_argument);

    bad = cfg;
    bad.split.seeds = {};
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("seeds"), std::invalid_argument);

    bad = cfg;
    bad.model_variant = "B9";
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.train.threshold = 0.0;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("threshold"),
                         std::invalid_argument);

    bad = cfg;
    bad.dataset.kind = "folder";
    bad.dataset.root = "/nonexistent/path/to/data";
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("not a directory"),
                         std::invalid_argument);

    CHECK_THROWS_AS(parse_experiment("{not json"), std::invalid_argument);
}

TEST_CASE("published preset files carry the published recipe") {
    const fs::path configs = MSMATCH_CONFIGS_DIR;
    auto rgb5 = parse_experiment(io::read_text(configs / "eurosat_rgb_n5.json"));
    CHECK(rgb5.train.lr0 == 0.03);
    CHECK(rgb5.train.momentum == 0.9);
    CHECK(rgb5.train.weight_decay == 7.5e-4);
    CHECK(rgb5.train.batch_labeled == 32);
    CHECK(rgb5.train.unlabeled_ratio == 7);
    CHECK(rgb5.train.threshold == 0.95);
    CHECK(rgb5.train.epochs == 500);
    CHECK(rgb5.train.iters_per_epoch == 1000);
    CHECK(rgb5.train.total_steps() == 500000);
    CHECK(rgb5.train.n_labels_per_class == 5);
    CHECK(rgb5.train.mode == train::TrainMode::ssl);
    CHECK(rgb5.train.lambda_u == 1.0);
    CHECK(rgb5.split.test_fraction == 0.10);
    CHECK(rgb5.split.seeds.size() == 3);
    CHECK(rgb5.model_variant == "B2");
    CHECK(rgb5.reference_accuracy == 94.53);

    auto ms5 = parse_experiment(io::read_text(configs / "eurosat_ms_n5.json"));
    CHECK(ms5.dataset.format == "multiband_raster");
    CHECK(ms5.reference_accuracy == 95.86);

    auto ucm80 = parse_experiment(io::read_text(configs / "ucm_n80.json"));
    CHECK(ucm80.train.batch_labeled == 16);
    CHECK(ucm80.train.unlabeled_ratio == 4);
    CHECK(ucm80.train.epochs == 1000);
    CHECK(ucm80.dataset.resize_to == 224);
    CHECK(ucm80.split.test_fraction == 0.20);
    CHECK(ucm80.train.n_labels_per_class == 80);

    auto sup = parse_experiment(io::read_text(configs / "eurosat_rgb_supervised_n5.json"));
    CHECK(sup.train.mode == train::TrainMode::supervised);
    CHECK(sup.train.unlabeled_ratio == 0);
}

TEST_CASE("run_train emits per-seed artifacts plus an aggregate") {
    const fs::path out = fs::temp_directory_path() / "msmatch_cli_run";
    fs::remove_all(out);
    ExperimentConfig cfg = desk_config(out);

    auto summary = run_train(cfg, true);
    REQUIRE(summary.all_ok);
    REQUIRE(summary.seeds.size() == 3);

    const fs::path run_dir = summary.run_dir;
    for (uint64_t seed : {0ull, 1ull, 2ull}) {
        const fs::path sd = run_dir / ("seed" + std::to_string(seed));
        for (const char* f : {"manifest.json", "split_manifest.json", "history.jsonl",
                              "report.json", "report.csv", "confusion.png", "final.ckpt"})
            CHECK(fs::exists(sd / f));
    }
    CHECK(fs::exists(run_dir / "aggregate_report.json"));
    CHECK(fs::exists(run_dir / "aggregate_report.csv"));
    CHECK(fs::exists(run_dir / "run_manifest.json"));

    // bit-reproducible rerun
    const std::string agg1 = io::read_text(run_dir / "aggregate_report.json");
    const std::string hist1 = io::read_text(run_dir / "seed1" / "history.jsonl");
    auto summary2 = run_train(cfg, true);
    REQUIRE(summary2.all_ok);
    CHECK(io::read_text(run_dir / "aggregate_report.json") == agg1);
    CHECK(io::read_text(run_dir / "seed1" / "history.jsonl") == hist1);

    // checkpoint references the manifest it was trained under
    auto ckpt = io::load_checkpoint(run_dir / "seed0" / "final.ckpt");
    const std::string manifest = io::read_text(run_dir / "seed0" / "manifest.json");
    CHECK(ckpt.manifest_hash == io::fnv1a(manifest));
    CHECK(ckpt.step == cfg.train.total_steps());

    fs::remove_all(out);
}

TEST_CASE("report merges runs and deduplicates by config hash") {
    const fs::path out = fs::temp_directory_path() / "msmatch_cli_report";
    fs::remove_all(out);
    ExperimentConfig cfg = desk_config(out);
    auto summary = run_train(cfg, true);
    REQUIRE(summary.all_ok);

    const fs::path report_dir = out / "merged";
    REQUIRE(run_report({summary.run_dir, summary.run_dir}, report_dir.string(), true) == 0);
    CHECK(fs::exists(report_dir / "results_table.csv"));

    const std::string table = io::read_text(report_dir / "results_table.csv");
    // duplicated input produced one data row (header + row + newline)
    CHECK(std::count(table.begin(), table.end(), '\n') == 2);
    // single-run report equals the run's aggregate accuracy
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", summary.aggregate.accuracy);
    CHECK(table.find(buf) != std::string::npos);
    CHECK(fs::exists(report_dir / (cfg.name + "_per_class.csv")));
    CHECK(io::read_text(report_dir / (cfg.name + "_per_class.csv")) ==
          eval::to_csv(summary.aggregate));

    CHECK_THROWS_WITH_AS(run_report({"/nonexistent/run"}, report_dir.string(), true),
                         doctest::Contains("missing artifacts"), std::runtime_error);
    fs::remove_all(out);
}

TEST_CASE("sweep runs every axis value and reports a table") {
    const fs::path out = fs::temp_directory_path() / "msmatch_cli_sweep";
    fs::remove_all(out);
    ExperimentConfig cfg = desk_config(out);
    cfg.split.seeds = {0};  // keep it quick

    auto sweep = run_sweep(cfg, SweepAxis::n_labels, {"2", "4"}, true);
    REQUIRE(sweep.cells.size() == 2);
    CHECK(sweep.all_ok);
    CHECK(sweep.table_csv.find("n_labels,2,4") == 0);
    CHECK(fs::exists(sweep.csv_path));

    // a failing value is recorded and the sweep continues
    auto bad = run_sweep(cfg, SweepAxis::n_labels, {"4", "100000"}, true);
    CHECK(!bad.all_ok);
    CHECK(bad.cells[0].ok);
    CHECK(!bad.cells[1].ok);
    CHECK(bad.table_csv.find("failed") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("saliency command writes maps from a trained checkpoint") {
    const fs::path out = fs::temp_directory_path() / "msmatch_cli_sal";
    fs::remove_all(out);
    ExperimentConfig cfg = desk_config(out, "supervised");
    cfg.split.seeds = {0};
    auto summary = run_train(cfg, true);
    REQUIRE(summary.all_ok);

    SaliencyRequest req;
    req.checkpoint = (fs::path(summary.run_dir) / "seed0" / "final.ckpt").string();
    req.count = 2;
    req.target = "predicted";
    req.out_dir = (out / "maps").string();
    REQUIRE(run_saliency(cfg, req) == 0);
    int64_t pngs = 0, npys = 0;
    for (const auto& e : fs::directory_iterator(out / "maps")) {
        pngs += e.path().extension() == ".png";
        npys += e.path().extension() == ".npy";
    }
    CHECK(pngs == 2);
    CHECK(npys == 2);

    SaliencyRequest bad = req;
    bad.ids = {"no/such/id"};
    CHECK_THROWS_AS(run_saliency(cfg, bad), std::invalid_argument);
    fs::remove_all(out);
}

TEST_CASE("the installed binary honors the exit-code contract") {
    const fs::path tmp = fs::temp_directory_path() / "msmatch_cli_bin";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    const std::string bin = MSMATCH_BIN;

    // invalid config -> exit 2
    io::write_text_atomic(tmp / "bad.json", "{\"name\": \"x\"}");
    int rc = std::system((bin + " validate-config -c " + (tmp / "bad.json").string() +
                          " >/dev/null 2>&1")
                             .c_str());
    CHECK(WEXITSTATUS(rc) == 2);

    // valid desk config -> exit 0 for validate and train
    ExperimentConfig cfg = desk_config(tmp / "runs");
    cfg.split.seeds = {0};
    cfg.train.epochs = 1;
    cfg.train.iters_per_epoch = 4;
    io::write_text_atomic(tmp / "ok.json", render_experiment(cfg));
    rc = std::system((bin + " validate-config -c " + (tmp / "ok.json").string() +
                      " >/dev/null 2>&1")
                         .c_str());
    CHECK(WEXITSTATUS(rc) == 0);
    rc = std::system(
        (bin + " train -q -c " + (tmp / "ok.json").string() + " >/dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(rc) == 0);

    fs::remove_all(tmp);
}
