// SPDX-License-Identifier: Apache-2.0

#include "msmatch/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace msmatch::eval {

MetricsReport compute_metrics(const std::vector<int64_t>& pred,
                              const std::vector<int64_t>& truth, int64_t k,
                              const std::vector<std::string>& class_names) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("compute_metrics: bad prediction/truth sizes");
    if (static_cast<int64_t>(class_names.size()) != k)
        throw std::invalid_argument("compute_metrics: class name count != K");

    std::vector<std::vector<int64_t>> counts(static_cast<size_t>(k),
                                             std::vector<int64_t>(static_cast<size_t>(k), 0));
    int64_t hits = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || pred[i] >= k || truth[i] < 0 || truth[i] >= k)
            throw std::invalid_argument("compute_metrics: label out of range");
        counts[static_cast<size_t>(truth[i])][static_cast<size_t>(pred[i])]++;
        hits += pred[i] == truth[i];
    }

    MetricsReport r;
    r.class_names = class_names;
    r.accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
    r.precision.resize(static_cast<size_t>(k));
    r.recall.resize(static_cast<size_t>(k));
    r.f1.resize(static_cast<size_t>(k));
    r.support.resize(static_cast<size_t>(k));
    r.confusion.assign(static_cast<size_t>(k), std::vector<double>(static_cast<size_t>(k), 0.0));

    for (int64_t c = 0; c < k; ++c) {
        int64_t row_sum = 0, col_sum = 0;
        for (int64_t j = 0; j < k; ++j) {
            row_sum += counts[static_cast<size_t>(c)][static_cast<size_t>(j)];
            col_sum += counts[static_cast<size_t>(j)][static_cast<size_t>(c)];
        }
        const int64_t tp = counts[static_cast<size_t>(c)][static_cast<size_t>(c)];
        if (row_sum == 0)
            throw std::invalid_argument("compute_metrics: class " +
                                        class_names[static_cast<size_t>(c)] +
                                        " has zero support");
        r.support[static_cast<size_t>(c)] = static_cast<double>(row_sum);
        double prec = 0.0;
        if (col_sum == 0) {
            r.zero_division = true;
        } else {
            prec = 100.0 * static_cast<double>(tp) / static_cast<double>(col_sum);
        }
        const double rec = 100.0 * static_cast<double>(tp) / static_cast<double>(row_sum);
        r.precision[static_cast<size_t>(c)] = prec;
        r.recall[static_cast<size_t>(c)] = rec;
        if (prec + rec == 0.0) {
            r.f1[static_cast<size_t>(c)] = 0.0;
            if (col_sum != 0) r.zero_division = r.zero_division || tp == 0;
        } else {
            r.f1[static_cast<size_t>(c)] = 2.0 * prec * rec / (prec + rec);
        }
        for (int64_t j = 0; j < k; ++j)
            r.confusion[static_cast<size_t>(c)][static_cast<size_t>(j)] =
                100.0 * static_cast<double>(counts[static_cast<size_t>(c)][static_cast<size_t>(j)]) /
                static_cast<double>(row_sum);
    }
    return r;
}

MetricsReport aggregate_seeds(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate_seeds: no reports");
    const auto& first = reports.front();
    for (const auto& r : reports)
        if (r.class_names != first.class_names)
            throw std::invalid_argument("aggregate_seeds: mismatched class sets");

    const int64_t k = first.num_classes();
    const double n = static_cast<double>(reports.size());

    MetricsReport out;
    out.class_names = first.class_names;
    out.n_seeds = static_cast<int64_t>(reports.size());
    out.precision.assign(static_cast<size_t>(k), 0.0);
    out.recall.assign(static_cast<size_t>(k), 0.0);
    out.f1.assign(static_cast<size_t>(k), 0.0);
    out.support.assign(static_cast<size_t>(k), 0.0);
    out.confusion.assign(static_cast<size_t>(k), std::vector<double>(static_cast<size_t>(k), 0.0));
    MetricsReport::Dispersion sd;
    sd.precision.assign(static_cast<size_t>(k), 0.0);
    sd.recall.assign(static_cast<size_t>(k), 0.0);
    sd.f1.assign(static_cast<size_t>(k), 0.0);
    sd.confusion.assign(static_cast<size_t>(k), std::vector<double>(static_cast<size_t>(k), 0.0));

    auto mean_std = [&](auto get) {
        double m = 0.0, s = 0.0;
        for (const auto& r : reports) m += get(r);
        m /= n;
        for (const auto& r : reports) s += (get(r) - m) * (get(r) - m);
        return std::pair<double, double>(m, std::sqrt(s / n));
    };

    std::tie(out.accuracy, sd.accuracy) =
        mean_std([](const MetricsReport& r) { return r.accuracy; });
    for (int64_t c = 0; c < k; ++c) {
        const size_t ci = static_cast<size_t>(c);
        std::tie(out.precision[ci], sd.precision[ci]) =
            mean_std([&](const MetricsReport& r) { return r.precision[ci]; });
        std::tie(out.recall[ci], sd.recall[ci]) =
            mean_std([&](const MetricsReport& r) { return r.recall[ci]; });
        std::tie(out.f1[ci], sd.f1[ci]) =
            mean_std([&](const MetricsReport& r) { return r.f1[ci]; });
        std::tie(out.support[ci], std::ignore) =
            mean_std([&](const MetricsReport& r) { return r.support[ci]; });
        for (int64_t j = 0; j < k; ++j) {
            const size_t ji = static_cast<size_t>(j);
            std::tie(out.confusion[ci][ji], sd.confusion[ci][ji]) =
                mean_std([&](const MetricsReport& r) { return r.confusion[ci][ji]; });
        }
    }
    for (const auto& r : reports) out.zero_division = out.zero_division || r.zero_division;
    out.stddev = std::move(sd);
    return out;
}

F1Table f1_by_label_budget(const std::map<int64_t, MetricsReport>& by_budget) {
    if (by_budget.empty()) throw std::invalid_argument("f1_by_label_budget: empty input");
    F1Table t;
    const auto& first = by_budget.begin()->second;
    for (const auto& [budget, report] : by_budget) {
        if (report.class_names != first.class_names)
            throw std::invalid_argument("f1_by_label_budget: mismatched class sets");
        t.budgets.push_back(budget);
    }
    // rows sorted by class name
    std::vector<size_t> order(first.class_names.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return first.class_names[a] < first.class_names[b];
    });
    for (size_t oi : order) {
        t.class_names.push_back(first.class_names[oi]);
        std::vector<double> row;
        for (const auto& [budget, report] : by_budget) row.push_back(report.f1[oi]);
        t.f1.push_back(std::move(row));
    }
    return t;
}

std::string to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["class_names"] = r.class_names;
    j["accuracy"] = r.accuracy;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    j["support"] = r.support;
    j["confusion"] = r.confusion;
    j["n_seeds"] = r.n_seeds;
    j["zero_division"] = r.zero_division;
    if (r.stddev) {
        j["std"]["accuracy"] = r.stddev->accuracy;
        j["std"]["precision"] = r.stddev->precision;
        j["std"]["recall"] = r.stddev->recall;
        j["std"]["f1"] = r.stddev->f1;
        j["std"]["confusion"] = r.stddev->confusion;
    }
    return j.dump(2);
}

MetricsReport report_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.class_names = j.at("class_names").get<std::vector<std::string>>();
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<std::vector<double>>();
    r.recall = j.at("recall").get<std::vector<double>>();
    r.f1 = j.at("f1").get<std::vector<double>>();
    r.support = j.at("support").get<std::vector<double>>();
    r.confusion = j.at("confusion").get<std::vector<std::vector<double>>>();
    r.n_seeds = j.at("n_seeds").get<int64_t>();
    r.zero_division = j.at("zero_division").get<bool>();
    if (j.contains("std")) {
        MetricsReport::Dispersion sd;
        sd.accuracy = j["std"].at("accuracy").get<double>();
        sd.precision = j["std"].at("precision").get<std::vector<double>>();
        sd.recall = j["std"].at("recall").get<std::vector<double>>();
        sd.f1 = j["std"].at("f1").get<std::vector<double>>();
        sd.confusion = j["std"].at("confusion").get<std::vector<std::vector<double>>>();
        r.stddev = std::move(sd);
    }
    return r;
}

namespace {
std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}
}  // namespace

std::string to_csv(const MetricsReport& r) {
    std::string out = "class,precision,recall,f1,support\n";
    for (int64_t c = 0; c < r.num_classes(); ++c) {
        const size_t ci = static_cast<size_t>(c);
        out += r.class_names[ci] + "," + fmt2(r.precision[ci]) + "," + fmt2(r.recall[ci]) +
               "," + fmt2(r.f1[ci]) + "," +
               std::to_string(static_cast<int64_t>(std::llround(r.support[ci]))) + "\n";
    }
    out += "accuracy," + fmt2(r.accuracy);
    if (r.stddev) out += ",std," + fmt2(r.stddev->accuracy);
    out += "\n";
    return out;
}

std::string to_csv(const F1Table& t) {
    std::string out = "class";
    for (int64_t b : t.budgets) out += "," + std::to_string(b);
    out += "\n";
    for (size_t c = 0; c < t.class_names.size(); ++c) {
        out += t.class_names[c];
        for (double v : t.f1[c]) out += "," + fmt2(v);
        out += "\n";
    }
    return out;
}

}  // namespace msmatch::eval
