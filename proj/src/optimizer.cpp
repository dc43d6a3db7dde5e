#include "ssfer/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace ssfer::nn {

AdamW::AdamW(const ModelState& s, const AdamWConfig& cfg) : cfg_(cfg) {
    check(cfg.beta1 >= 0 && cfg.beta1 < 1 && cfg.beta2 >= 0 && cfg.beta2 < 1,
          "optimizer: betas must be in [0,1)");
    check(cfg.eps > 0, "optimizer: eps must be positive");
    check(cfg.weight_decay >= 0, "optimizer: negative weight decay");
    m_.reserve(s.tensor_count());
    v_.reserve(s.tensor_count());
    for (int i = 0; i < s.tensor_count(); ++i) {
        m_.emplace_back(Mat::Zero(s.param(i).rows(), s.param(i).cols()));
        v_.emplace_back(Mat::Zero(s.param(i).rows(), s.param(i).cols()));
        decay_.push_back(s.names()[i].ends_with(".w") ? 1 : 0);
    }
}

void AdamW::step(ModelState& s, const ModelGrads& g, double lr) {
    check(static_cast<size_t>(s.tensor_count()) == g.size(), "optimizer: grad layout mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (int i = 0; i < s.tensor_count(); ++i) {
        Mat& p = s.param(i);
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g[i];
        v_[i] = cfg_.beta2 * v_[i].array().matrix() +
                (1.0 - cfg_.beta2) * g[i].cwiseProduct(g[i]);
        const Mat mhat = m_[i] / bc1;
        const Mat vhat = v_[i] / bc2;
        if (decay_[i]) p -= lr * cfg_.weight_decay * p;
        p -= lr * (mhat.array() / (vhat.array().sqrt() + cfg_.eps)).matrix();
    }
    if (!s.all_finite())
        fail("optimizer: non-finite parameter after step ", std::to_string(t_),
             " (training diverged)");
}

double LrSchedule::at(int step) const {
    check(total_steps > 0 && step >= 0 && step < total_steps, "lr schedule: step out of range");
    check(warmup_steps >= 0 && warmup_steps <= total_steps, "lr schedule: bad warmup span");
    if (step < warmup_steps)
        return warmup_init_lr +
               (base_lr - warmup_init_lr) * (step + 1) / static_cast<double>(warmup_steps);
    const int span = total_steps - warmup_steps;
    if (span <= 0) return base_lr;
    const double prog = static_cast<double>(step - warmup_steps) / span;
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + std::cos(std::numbers::pi * prog));
}

}  // namespace ssfer::nn
