// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "msmatch/core/rng.hpp"
#include "msmatch/eval/metrics.hpp"

using namespace msmatch;
using namespace msmatch::eval;

namespace {
std::vector<std::string> names_of(int64_t k) {
    std::vector<std::string> out;
    for (int64_t i = 0; i < k; ++i) out.push_back("c" + std::to_string(i));
    return out;
}
}  // namespace

TEST_CASE("perfect prediction: accuracy 100, identity confusion") {
    std::vector<int64_t> truth = {0, 1, 2, 0, 1, 2};
    auto r = compute_metrics(truth, truth, 3, names_of(3));
    CHECK(r.accuracy == 100.0);
    for (int64_t c = 0; c < 3; ++c) {
        CHECK(r.f1[static_cast<size_t>(c)] == 100.0);
        CHECK(r.precision[static_cast<size_t>(c)] == 100.0);
        CHECK(r.recall[static_cast<size_t>(c)] == 100.0);
        for (int64_t j = 0; j < 3; ++j)
            CHECK(r.confusion[static_cast<size_t>(c)][static_cast<size_t>(j)] ==
                  (c == j ? 100.0 : 0.0));
    }
}

TEST_CASE("hand-computed 3-sample case") {
    auto r = compute_metrics({0, 1, 1}, {0, 0, 1}, 2, names_of(2));
    CHECK(r.precision[0] == doctest::Approx(100.0));
    CHECK(r.recall[0] == doctest::Approx(50.0));
    CHECK(r.f1[0] == doctest::Approx(200.0 / 3.0).epsilon(1e-9));
    CHECK(r.precision[1] == doctest::Approx(50.0));
    CHECK(r.recall[1] == doctest::Approx(100.0));
    CHECK(r.f1[1] == doctest::Approx(200.0 / 3.0).epsilon(1e-9));
    CHECK(r.accuracy == doctest::Approx(200.0 / 3.0).epsilon(1e-9));
    CHECK(r.support[0] == 2.0);
    CHECK(r.support[1] == 1.0);
}

TEST_CASE("metrics agree with a brute-force counting oracle on 1000 cases") {
    Rng rng(555);
    for (int rep = 0; rep < 1000; ++rep) {
        const int64_t k = 2 + rng.uniform_int(4);   // K <= 5
        const int64_t n = k + rng.uniform_int(20);  // N <= 24, every class present
        std::vector<int64_t> truth, pred;
        for (int64_t c = 0; c < k; ++c) truth.push_back(c);  // guarantee support
        for (int64_t i = k; i < n; ++i) truth.push_back(rng.uniform_int(k));
        for (int64_t i = 0; i < n; ++i) pred.push_back(rng.uniform_int(k));

        auto r = compute_metrics(pred, truth, k, names_of(k));

        // independent counting
        int64_t hits = 0;
        for (int64_t i = 0; i < n; ++i) hits += pred[i] == truth[i];
        REQUIRE(r.accuracy == 100.0 * static_cast<double>(hits) / static_cast<double>(n));
        for (int64_t c = 0; c < k; ++c) {
            int64_t tp = 0, fp = 0, fn = 0;
            for (int64_t i = 0; i < n; ++i) {
                if (pred[i] == c && truth[i] == c) ++tp;
                if (pred[i] == c && truth[i] != c) ++fp;
                if (pred[i] != c && truth[i] == c) ++fn;
            }
            const double prec = tp + fp == 0 ? 0.0 : 100.0 * tp / static_cast<double>(tp + fp);
            const double rec = 100.0 * tp / static_cast<double>(tp + fn);
            const double f1 =
                prec + rec == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
            REQUIRE(r.precision[static_cast<size_t>(c)] == prec);
            REQUIRE(r.recall[static_cast<size_t>(c)] == rec);
            REQUIRE(r.f1[static_cast<size_t>(c)] == f1);
            REQUIRE(r.support[static_cast<size_t>(c)] == static_cast<double>(tp + fn));
            // recall equals the confusion diagonal of that row
            REQUIRE(r.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)] == rec);
        }

        // micro consistency: accuracy equals support-weighted mean recall
        double weighted = 0.0, total = 0.0;
        for (int64_t c = 0; c < k; ++c) {
            weighted += r.recall[static_cast<size_t>(c)] * r.support[static_cast<size_t>(c)];
            total += r.support[static_cast<size_t>(c)];
        }
        REQUIRE(std::abs(r.accuracy - weighted / total) < 1e-9);

        // confusion rows sum to 100 within rounding tolerance
        for (int64_t c = 0; c < k; ++c) {
            double row = 0.0;
            for (int64_t j = 0; j < k; ++j)
                row += r.confusion[static_cast<size_t>(c)][static_cast<size_t>(j)];
            REQUIRE(std::abs(row - 100.0) < 0.5);
        }
    }
}

TEST_CASE("zero support is fatal, zero division flagged") {
    CHECK_THROWS_WITH_AS(compute_metrics({0, 0}, {0, 0}, 2, names_of(2)),
                         doctest::Contains("zero support"), std::invalid_argument);

    // class 1 never predicted -> precision 0 with flag
    auto r = compute_metrics({0, 0, 0}, {0, 0, 1}, 2, names_of(2));
    CHECK(r.zero_division);
    CHECK(r.precision[1] == 0.0);
    CHECK(r.f1[1] == 0.0);
}

TEST_CASE("seed aggregation: mean, std, permutation invariance") {
    auto a = compute_metrics({0, 1, 1, 1}, {0, 1, 0, 1}, 2, names_of(2));
    auto b = compute_metrics({0, 1, 0, 1}, {0, 1, 0, 1}, 2, names_of(2));

    auto single = aggregate_seeds({a});
    CHECK(single.accuracy == a.accuracy);
    CHECK(single.stddev->accuracy == 0.0);
    CHECK(single.n_seeds == 1);

    auto ab = aggregate_seeds({a, b});
    auto ba = aggregate_seeds({b, a});
    CHECK(ab.accuracy == doctest::Approx((a.accuracy + b.accuracy) / 2.0));
    CHECK(ab.accuracy == ba.accuracy);
    CHECK(ab.stddev->accuracy == ba.stddev->accuracy);
    CHECK(ab.n_seeds == 2);

    // accuracies 96 and 98 -> 97 +- 1
    MetricsReport m96 = a, m98 = a;
    m96.accuracy = 96.0;
    m98.accuracy = 98.0;
    auto agg = aggregate_seeds({m96, m98});
    CHECK(agg.accuracy == doctest::Approx(97.0));
    CHECK(agg.stddev->accuracy == doctest::Approx(1.0));

    MetricsReport other = a;
    other.class_names = {"x", "y"};
    CHECK_THROWS_AS(aggregate_seeds({a, other}), std::invalid_argument);
}

TEST_CASE("f1-by-budget table ordering") {
    auto r5 = compute_metrics({0, 1}, {0, 1}, 2, {"zebra", "apple"});
    auto r50 = compute_metrics({0, 1, 1}, {0, 1, 0}, 2, {"zebra", "apple"});
    std::map<int64_t, MetricsReport> by_budget{{50, r50}, {5, r5}};
    auto t = f1_by_label_budget(by_budget);
    CHECK(t.budgets == std::vector<int64_t>{5, 50});
    CHECK(t.class_names == std::vector<std::string>{"apple", "zebra"});
    REQUIRE(t.f1.size() == 2);
    REQUIRE(t.f1[0].size() == 2);
    // single budget, single class
    auto single = f1_by_label_budget({{5, r5}});
    CHECK(single.f1[0][0] == r5.f1[1]);  // "apple" sorted first
}

TEST_CASE("json round trip and csv rendering") {
    auto r = compute_metrics({0, 1, 1}, {0, 0, 1}, 2, names_of(2));
    auto agg = aggregate_seeds({r, r});
    auto back = report_from_json(to_json(agg));
    CHECK(back.accuracy == agg.accuracy);
    CHECK(back.stddev.has_value());
    CHECK(back.stddev->accuracy == agg.stddev->accuracy);
    CHECK(back.confusion == agg.confusion);

    const std::string csv = to_csv(agg);
    CHECK(csv.find("class,precision,recall,f1,support") == 0);
    CHECK(csv.find("c0,") != std::string::npos);
}

TEST_CASE("render artifacts exist on disk") {
    namespace fs = std::filesystem;
    auto r = compute_metrics({0, 1, 2, 1}, {0, 1, 2, 2}, 3, names_of(3));
    const fs::path dir = fs::temp_directory_path() / "msmatch_eval_test";
    fs::create_directories(dir);
    write_confusion_heatmap(r, (dir / "conf.png").string());
    CHECK(fs::exists(dir / "conf.png"));

    auto t = f1_by_label_budget({{4, r}, {16, r}});
    write_f1_budget_plot(t, (dir / "f1.png").string());
    CHECK(fs::exists(dir / "f1.png"));
    fs::remove_all(dir);
}
