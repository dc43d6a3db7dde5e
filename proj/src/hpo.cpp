#include "ssfer/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ssfer/rng.hpp"

namespace ssfer::hpo {

double gwo_control_scalar(int t, int total) {
    if (total <= 1) return 2.0;
    return 2.0 * (1.0 - static_cast<double>(t) / (total - 1));
}

GwoResult gwo_optimize(const GwoConfig& cfg, const Objective& f, uint64_t seed) {
    const int dims = static_cast<int>(cfg.lower.size());
    check(dims > 0, "gwo: empty bounds");
    check(cfg.upper.size() == cfg.lower.size(), "gwo: bound size mismatch");
    for (int d = 0; d < dims; ++d)
        check(cfg.lower[d] <= cfg.upper[d], "gwo: lower bound above upper bound");
    check(cfg.wolves >= 4, "gwo: need at least 4 wolves");
    check(cfg.iterations >= 1, "gwo: need at least 1 iteration");

    Rng rng(seed);
    const auto clamp = [&](double v, int d) {
        return std::min(cfg.upper[d], std::max(cfg.lower[d], v));
    };

    std::vector<std::vector<double>> pack(cfg.wolves, std::vector<double>(dims));
    for (auto& w : pack)
        for (int d = 0; d < dims; ++d) w[d] = rng.uniform(cfg.lower[d], cfg.upper[d]);
    for (size_t i = 0; i < cfg.seeds.size() && i < pack.size(); ++i) {
        check(cfg.seeds[i].size() == static_cast<size_t>(dims), "gwo: seed dimension mismatch");
        for (int d = 0; d < dims; ++d) pack[i][d] = clamp(cfg.seeds[i][d], d);
    }

    GwoResult res;
    res.best = pack[0];  // stays valid even if every fitness is non-finite
    res.best_fitness = std::numeric_limits<double>::infinity();
    std::vector<double> fit(cfg.wolves);

    for (int t = 0; t < cfg.iterations; ++t) {
        for (int i = 0; i < cfg.wolves; ++i) {
            double v = f(pack[i]);
            ++res.evaluations;
            if (!std::isfinite(v)) {
                log_warn("gwo: non-finite fitness, treating as +inf");
                v = std::numeric_limits<double>::infinity();
            }
            fit[i] = v;
            if (v < res.best_fitness) {
                res.best_fitness = v;
                res.best = pack[i];
            }
        }
        res.history.push_back(res.best_fitness);
        res.history_position.push_back(res.best);
        if (t == cfg.iterations - 1) break;

        std::vector<int> rank(cfg.wolves);
        for (int i = 0; i < cfg.wolves; ++i) rank[i] = i;
        std::sort(rank.begin(), rank.end(), [&](int a, int b) { return fit[a] < fit[b]; });
        const std::array<const std::vector<double>*, 3> leaders = {
            &pack[rank[0]], &pack[rank[1]], &pack[rank[2]]};

        const double a = gwo_control_scalar(t, cfg.iterations);
        std::vector<std::vector<double>> next = pack;
        for (int i = 0; i < cfg.wolves; ++i) {
            for (int d = 0; d < dims; ++d) {
                double acc = 0.0;
                for (const auto* lead : leaders) {
                    const double r1 = rng.uniform();
                    const double r2 = rng.uniform();
                    const double A = 2.0 * a * r1 - a;
                    const double C = 2.0 * r2;
                    const double D = std::abs(C * (*lead)[d] - pack[i][d]);
                    acc += (*lead)[d] - A * D;
                }
                next[i][d] = clamp(acc / 3.0, d);
            }
        }
        pack = std::move(next);
    }
    return res;
}

std::array<double, 3> decode_lr_triple(std::vector<double> log10_pos) {
    check(log10_pos.size() == 3, "lr decode: expected 3 coordinates");
    std::sort(log10_pos.begin(), log10_pos.end());
    return {std::pow(10.0, log10_pos[0]), std::pow(10.0, log10_pos[1]),
            std::pow(10.0, log10_pos[2])};
}

LrSearchResult lr_search(const LrSearchConfig& scfg, const supervised::SupervisedConfig& base,
                         const nn::ModelState& init_state,
                         const std::vector<ImageSample>& train,
                         const std::vector<ImageSample>& val, const data::BoxProvider& boxes,
                         uint64_t seed) {
    LrSearchResult out;
    out.config = base;
    if (scfg.proxy_epochs <= 0) return out;
    check(scfg.log10_lo < scfg.log10_hi, "lr search: bad log10 bounds");
    check(!train.empty() && !val.empty(), "lr search: need train and validation samples");

    supervised::SupervisedConfig proxy = base;
    proxy.epochs = scfg.proxy_epochs;
    proxy.warmup_epochs = std::min(base.warmup_epochs, std::max(1, scfg.proxy_epochs / 5));
    proxy.auto_extend_small_labels = false;

    GwoConfig gcfg;
    gcfg.wolves = scfg.wolves;
    gcfg.iterations = scfg.iterations;
    gcfg.lower.assign(3, scfg.log10_lo);
    gcfg.upper.assign(3, scfg.log10_hi);
    gcfg.seeds = {{std::log10(base.min_lr), std::log10(base.warmup_init_lr),
                   std::log10(base.base_lr)}};

    const uint64_t proxy_seed = derive_seed(seed, 4);
    const Objective objective = [&](const std::vector<double>& pos) {
        const auto [lo, mid, hi] = decode_lr_triple(pos);
        supervised::SupervisedConfig c = proxy;
        c.min_lr = lo;
        c.warmup_init_lr = mid;
        c.base_lr = hi;
        const auto r = supervised::run_supervised(c, init_state, train, val, boxes,
                                                  proxy_seed, "");
        return -r.best_acc;
    };

    out.search = gwo_optimize(gcfg, objective, derive_seed(seed, 5));
    const auto [lo, mid, hi] = decode_lr_triple(out.search.best);
    out.config.min_lr = lo;
    out.config.warmup_init_lr = mid;
    out.config.base_lr = hi;
    out.proxy_best_acc = -out.search.best_fitness;
    out.tuned = true;
    return out;
}

}  // namespace ssfer::hpo
