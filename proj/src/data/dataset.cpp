// SPDX-License-Identifier: Apache-2.0

#include "msmatch/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "msmatch/core/rng.hpp"

namespace msmatch::data {

std::vector<int64_t> LabeledDataset::per_class_counts() const {
    std::vector<int64_t> counts(static_cast<size_t>(num_classes()), 0);
    for (const auto& s : samples) counts.at(static_cast<size_t>(s.label))++;
    return counts;
}

void LabeledDataset::validate() const {
    if (samples.empty()) throw std::invalid_argument("dataset is empty");
    std::set<std::string> names(class_names.begin(), class_names.end());
    if (static_cast<int64_t>(names.size()) != num_classes())
        throw std::invalid_argument("class names are not distinct");
    const auto& shape = samples.front().pixels.shape();
    if (shape.size() != 3) throw std::invalid_argument("samples must be [C,H,W]");
    if (shape[0] < 1 || shape[1] < 8 || shape[2] < 8)
        throw std::invalid_argument("sample below minimum size (C>=1, H,W>=8)");
    if (shape[0] != channels)
        throw std::invalid_argument("dataset channel count disagrees with samples");
    for (const auto& s : samples) {
        if (s.pixels.shape() != shape)
            throw std::invalid_argument("sample " + s.id + " has mismatched shape");
        if (s.label < 0 || s.label >= num_classes())
            throw std::invalid_argument("sample " + s.id + " has label out of range");
        for (int64_t i = 0; i < s.pixels.numel(); ++i)
            if (!std::isfinite(s.pixels[i]))
                throw std::invalid_argument("sample " + s.id + " has non-finite pixels");
    }
    if (channel_stats) {
        for (double sd : channel_stats->stddev)
            if (!(sd > 0.0))
                throw std::invalid_argument("channel stats contain non-positive stddev");
    }
}

namespace {

LabeledDataset shell_of(const LabeledDataset& ds) {
    LabeledDataset out;
    out.class_names = ds.class_names;
    out.channels = ds.channels;
    out.value_range = ds.value_range;
    out.channel_stats = ds.channel_stats;
    return out;
}

// indices per class, in source order
std::vector<std::vector<int64_t>> class_buckets(const LabeledDataset& ds) {
    std::vector<std::vector<int64_t>> buckets(static_cast<size_t>(ds.num_classes()));
    for (int64_t i = 0; i < ds.size(); ++i)
        buckets[static_cast<size_t>(ds.samples[static_cast<size_t>(i)].label)].push_back(i);
    return buckets;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds,
                                                           double test_fraction,
                                                           uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("test_fraction must be in (0,1)");
    auto buckets = class_buckets(ds);
    std::vector<bool> to_test(static_cast<size_t>(ds.size()), false);
    Rng rng(Rng::mix(seed, 0x5b117));
    for (size_t c = 0; c < buckets.size(); ++c) {
        auto& idx = buckets[c];
        if (idx.size() < 2)
            throw std::invalid_argument("class " + ds.class_names[c] +
                                        " has fewer than 2 samples");
        const int64_t m = static_cast<int64_t>(idx.size());
        const int64_t n_test =
            static_cast<int64_t>(std::floor(test_fraction * static_cast<double>(m) + 0.5));
        if (n_test == 0)
            throw std::invalid_argument("class " + ds.class_names[c] +
                                        " would receive 0 test samples");
        Rng crng = rng.child(static_cast<uint64_t>(c));
        auto pool = idx;
        crng.shuffle(pool);
        for (int64_t i = 0; i < n_test; ++i) to_test[static_cast<size_t>(pool[i])] = true;
    }
    LabeledDataset train = shell_of(ds), test = shell_of(ds);
    for (int64_t i = 0; i < ds.size(); ++i) {
        (to_test[static_cast<size_t>(i)] ? test : train)
            .samples.push_back(ds.samples[static_cast<size_t>(i)]);
    }
    return {std::move(train), std::move(test)};
}

SplitPartition select_labeled_subset(const LabeledDataset& train, int64_t n_per_class,
                                     uint64_t seed) {
    if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
    auto buckets = class_buckets(train);
    std::vector<bool> labeled(static_cast<size_t>(train.size()), false);
    Rng rng(Rng::mix(seed, 0xba6));
    for (size_t c = 0; c < buckets.size(); ++c) {
        auto& idx = buckets[c];
        if (static_cast<int64_t>(idx.size()) < n_per_class)
            throw std::invalid_argument(
                "class " + train.class_names[c] + " has only " +
                std::to_string(idx.size()) + " train samples, need " +
                std::to_string(n_per_class));
        Rng crng = rng.child(static_cast<uint64_t>(c));
        auto pool = idx;
        crng.shuffle(pool);
        for (int64_t i = 0; i < n_per_class; ++i)
            labeled[static_cast<size_t>(pool[i])] = true;
    }
    SplitPartition p;
    p.seed = seed;
    p.train_labeled = shell_of(train);
    p.train_unlabeled = shell_of(train);
    p.test = shell_of(train);
    for (int64_t i = 0; i < train.size(); ++i)
        (labeled[static_cast<size_t>(i)] ? p.train_labeled : p.train_unlabeled)
            .samples.push_back(train.samples[static_cast<size_t>(i)]);
    return p;
}

SplitPartition make_partition(const LabeledDataset& ds, double test_fraction,
                              int64_t n_per_class, uint64_t seed) {
    auto [train, test] = stratified_split(ds, test_fraction, seed);
    SplitPartition p = select_labeled_subset(train, n_per_class, seed);
    p.test = std::move(test);
    p.seed = seed;
    return p;
}

ChannelStats compute_normalization(const LabeledDataset& ds) {
    if (ds.samples.empty()) throw std::invalid_argument("compute_normalization: empty");
    const int64_t C = ds.channels;
    std::vector<double> sum(static_cast<size_t>(C), 0.0);
    std::vector<double> sumsq(static_cast<size_t>(C), 0.0);
    int64_t count = 0;
    for (const auto& s : ds.samples) {
        const int64_t HW = s.height() * s.width();
        for (int64_t c = 0; c < C; ++c) {
            const double* plane = s.pixels.data() + c * HW;
            for (int64_t p = 0; p < HW; ++p) {
                sum[static_cast<size_t>(c)] += plane[p];
                sumsq[static_cast<size_t>(c)] += plane[p] * plane[p];
            }
        }
        count += HW;
    }
    ChannelStats stats;
    stats.mean.resize(static_cast<size_t>(C));
    stats.stddev.resize(static_cast<size_t>(C));
    for (int64_t c = 0; c < C; ++c) {
        const double m = sum[static_cast<size_t>(c)] / static_cast<double>(count);
        const double var =
            std::max(0.0, sumsq[static_cast<size_t>(c)] / static_cast<double>(count) - m * m);
        stats.mean[static_cast<size_t>(c)] = m;
        stats.stddev[static_cast<size_t>(c)] = std::max(std::sqrt(var), 1e-6);
    }
    return stats;
}

ImageSample normalize(const ImageSample& s, const ChannelStats& stats) {
    const int64_t C = s.channels(), HW = s.height() * s.width();
    if (static_cast<int64_t>(stats.mean.size()) != C)
        throw std::invalid_argument("normalize: stats/channel mismatch");
    ImageSample out = s;
    for (int64_t c = 0; c < C; ++c) {
        double* plane = out.pixels.data() + c * HW;
        const double m = stats.mean[static_cast<size_t>(c)];
        const double inv = 1.0 / stats.stddev[static_cast<size_t>(c)];
        for (int64_t p = 0; p < HW; ++p) plane[p] = (plane[p] - m) * inv;
    }
    return out;
}

ImageSample denormalize(const ImageSample& s, const ChannelStats& stats) {
    const int64_t C = s.channels(), HW = s.height() * s.width();
    ImageSample out = s;
    for (int64_t c = 0; c < C; ++c) {
        double* plane = out.pixels.data() + c * HW;
        const double m = stats.mean[static_cast<size_t>(c)];
        const double sd = stats.stddev[static_cast<size_t>(c)];
        for (int64_t p = 0; p < HW; ++p) plane[p] = plane[p] * sd + m;
    }
    return out;
}

uint64_t dataset_hash(const LabeledDataset& ds) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* data, size_t n) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& name : ds.class_names) feed(name.data(), name.size());
    for (const auto& s : ds.samples) {
        feed(s.id.data(), s.id.size());
        feed(&s.label, sizeof s.label);
        feed(s.pixels.data(), static_cast<size_t>(s.pixels.numel()) * sizeof(double));
    }
    return h;
}

std::string split_manifest_json(const SplitPartition& p, uint64_t source_hash,
                                const std::optional<ChannelStats>& stats) {
    nlohmann::json j;
    j["dataset_hash"] = source_hash;
    j["seed"] = p.seed;
    auto ids_of = [](const LabeledDataset& d) {
        std::vector<std::string> ids;
        ids.reserve(d.samples.size());
        for (const auto& s : d.samples) ids.push_back(s.id);
        return ids;
    };
    j["train_labeled_ids"] = ids_of(p.train_labeled);
    j["train_unlabeled_ids"] = ids_of(p.train_unlabeled);
    j["test_ids"] = ids_of(p.test);
    if (stats) {
        j["channel_mean"] = stats->mean;
        j["channel_std"] = stats->stddev;
    }
    return j.dump(2);
}

Tensor resize_bilinear(const Tensor& chw, int64_t out_h, int64_t out_w) {
    const int64_t C = chw.dim(0), H = chw.dim(1), W = chw.dim(2);
    Tensor out({C, out_h, out_w});
    const double sy = static_cast<double>(H) / static_cast<double>(out_h);
    const double sx = static_cast<double>(W) / static_cast<double>(out_w);
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < out_h; ++y) {
            double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
            fy = std::clamp(fy, 0.0, static_cast<double>(H - 1));
            const int64_t y0 = static_cast<int64_t>(std::floor(fy));
            const int64_t y1 = std::min(y0 + 1, H - 1);
            const double wy = fy - static_cast<double>(y0);
            for (int64_t x = 0; x < out_w; ++x) {
                double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
                fx = std::clamp(fx, 0.0, static_cast<double>(W - 1));
                const int64_t x0 = static_cast<int64_t>(std::floor(fx));
                const int64_t x1 = std::min(x0 + 1, W - 1);
                const double wx = fx - static_cast<double>(x0);
                const double v =
                    (1.0 - wy) * ((1.0 - wx) * chw.at3(c, y0, x0) + wx * chw.at3(c, y0, x1)) +
                    wy * ((1.0 - wx) * chw.at3(c, y1, x0) + wx * chw.at3(c, y1, x1));
                out.at3(c, y, x) = v;
            }
        }
    return out;
}

}  // namespace msmatch::data
