#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "ssfer/common.hpp"

namespace ssfer {

// SplitMix64, used to fan a run seed out into independent stream seeds.
// Stage seeds are fixed ordinals of this sequence, so skipping one stage
// never shifts the streams of the others.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t root, uint64_t ordinal) {
    uint64_t s = root;
    uint64_t out = 0;
    for (uint64_t i = 0; i <= ordinal; ++i) out = splitmix64(s);
    return out;
}

// mt19937_64 core with hand-written distributions. std::*_distribution is
// implementation-defined, this keeps streams byte-identical across stdlibs.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // uniform in [0,1), 53-bit resolution
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n), n > 0, via rejection (unbiased)
    uint64_t uniform_index(uint64_t n) {
        check(n > 0, "uniform_index: empty range");
        const uint64_t limit = ~uint64_t{0} - ~uint64_t{0} % n;
        uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        check(lo <= hi, "uniform_int: bad range");
        return lo + static_cast<int>(uniform_index(static_cast<uint64_t>(hi - lo) + 1));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, no caching so the stream advances a fixed 2 draws per call
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // resamples until within 2 stddevs
    double truncated_normal(double mean, double stddev) {
        double z = normal();
        while (std::abs(z) > 2.0) z = normal();
        return mean + stddev * z;
    }

    // Marsaglia-Tsang; alpha < 1 handled with the U^(1/alpha) boost
    double gamma(double alpha) {
        check(alpha > 0.0, "gamma: alpha must be positive");
        if (alpha < 1.0) {
            const double u = uniform();
            return gamma(alpha + 1.0) * std::pow(u > 0.0 ? u : 0x1.0p-53, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

    // Fisher-Yates
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // first k of a seeded shuffle of [0,n), returned unsorted
    std::vector<int> sample_without_replacement(int n, int k) {
        check(k >= 0 && k <= n, "sample_without_replacement: k out of range");
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        shuffle(idx);
        idx.resize(k);
        return idx;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace ssfer
