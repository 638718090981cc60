// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace msmatch {

/// Deterministic pseudo-random stream. Wraps std::mt19937_64 (whose output
/// sequence is fixed by the standard) and provides its own variate
/// transforms, so identical seeds give identical draws on every platform.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(seed), seed_material_(seed) {}

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). The modulo bias at 64 bits is far below
    /// anything observable at our sample counts.
    int64_t uniform_int(int64_t n) {
        return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
            int64_t j = uniform_int(i + 1);
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
        }
    }

    /// Derive an independent stream from this stream's seed and a tag.
    /// Children with distinct tags are decorrelated; the parent state is
    /// not advanced.
    Rng child(uint64_t tag) const { return Rng(mix(seed_material_, tag)); }

    static uint64_t mix(uint64_t a, uint64_t b) {
        // splitmix64 finalizer over the combined words
        uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b << 1 | b >> 63);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static uint64_t hash_str(const std::string& s) {
        // FNV-1a 64
        uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    /// Rng whose stream is a pure function of (seed, tags...).
    static Rng from_tags(uint64_t seed, uint64_t t1, uint64_t t2 = 0, uint64_t t3 = 0) {
        uint64_t s = mix(seed, t1);
        s = mix(s, t2);
        s = mix(s, t3);
        return Rng(s);
    }

private:
    std::mt19937_64 engine_;
    uint64_t seed_material_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace msmatch
