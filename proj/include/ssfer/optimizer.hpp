#pragma once

#include <cstdint>
#include <vector>

#include "ssfer/model.hpp"

namespace ssfer::nn {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;
};

// decoupled weight decay, applied to the matmul weights only (names ending
// in ".w"); biases, norms and the token/position embeddings are exempt
class AdamW {
public:
    AdamW(const ModelState& s, const AdamWConfig& cfg);
    void step(ModelState& s, const ModelGrads& g, double lr);
    int64_t steps_taken() const { return t_; }

private:
    AdamWConfig cfg_;
    int64_t t_ = 0;
    std::vector<Mat> m_, v_;
    std::vector<char> decay_;
};

// linear warmup (from warmup_init_lr up to base_lr) then cosine down to
// min_lr; all per optimizer step
struct LrSchedule {
    double base_lr = 0.0;
    double min_lr = 0.0;
    double warmup_init_lr = 0.0;
    int warmup_steps = 0;
    int total_steps = 0;

    double at(int step) const;
};

}  // namespace ssfer::nn
