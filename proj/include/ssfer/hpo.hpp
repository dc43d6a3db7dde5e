#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "ssfer/dataset.hpp"
#include "ssfer/model.hpp"
#include "ssfer/supervised.hpp"

namespace ssfer::hpo {

// exploration scalar, 2 at the first round and 0 at the last
double gwo_control_scalar(int t, int total);

struct GwoConfig {
    int wolves = 8;
    int iterations = 10;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::vector<double>> seeds;  // injected into the initial pack
};

using Objective = std::function<double(const std::vector<double>&)>;

struct GwoResult {
    std::vector<double> best;
    double best_fitness = 0.0;
    std::vector<double> history;  // best-so-far after each evaluation round
    std::vector<std::vector<double>> history_position;  // matching positions
    int64_t evaluations = 0;
};

// pack search toward the three best positions; every round evaluates first,
// so a single iteration reduces to random search over the initial pack
GwoResult gwo_optimize(const GwoConfig& cfg, const Objective& f, uint64_t seed);

struct LrSearchConfig {
    int wolves = 6;
    int iterations = 4;
    int proxy_epochs = 5;  // 0 skips the search entirely
    double log10_lo = -6.0;
    double log10_hi = -2.0;
};

// position -> sorted (min_lr, warmup_init_lr, base_lr)
std::array<double, 3> decode_lr_triple(std::vector<double> log10_pos);

struct LrSearchResult {
    bool tuned = false;
    supervised::SupervisedConfig config;  // base with the lr triple replaced when tuned
    GwoResult search;
    double proxy_best_acc = 0.0;
};

// tunes the fine-tuning lr triple against short proxy runs scored by
// validation accuracy; the base triple rides along in the initial pack so
// the result never loses to the starting point on the proxy
LrSearchResult lr_search(const LrSearchConfig& scfg, const supervised::SupervisedConfig& base,
                         const nn::ModelState& init_state,
                         const std::vector<ImageSample>& train,
                         const std::vector<ImageSample>& val, const data::BoxProvider& boxes,
                         uint64_t seed);

}  // namespace ssfer::hpo
