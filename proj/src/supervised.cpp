#include "ssfer/supervised.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>

#include "ssfer/csv.hpp"
#include "ssfer/checkpoint.hpp"
#include "ssfer/evalkit.hpp"
#include "ssfer/optimizer.hpp"
#include "ssfer/rng.hpp"
#include "ssfer/threading.hpp"

namespace fs = std::filesystem;

namespace ssfer::supervised {

Mixing mixing_from_string(const std::string& name) {
    if (name == "none") return Mixing::none;
    if (name == "mixup") return Mixing::mixup;
    if (name == "facemix") return Mixing::facemix;
    fail("unknown mixing mode '", name, "' (expected none/mixup/facemix)");
}

std::string to_string(Mixing m) {
    switch (m) {
        case Mixing::none: return "none";
        case Mixing::mixup: return "mixup";
        case Mixing::facemix: return "facemix";
    }
    return "?";
}

double soft_ce(const Vec& logits, const Vec& target_probs) {
    check(logits.size() == target_probs.size() && logits.size() > 0,
          "soft_ce: shape mismatch");
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return target_probs.dot(Vec::Constant(logits.size(), lse) - logits);
}

Vec soft_ce_grad(const Vec& logits, const Vec& target_probs) {
    return nn::softmax(logits) - target_probs;
}

Vec one_hot(int label, int classes) {
    check(label >= 0 && label < classes, "one_hot: label out of range");
    Vec v = Vec::Zero(classes);
    v(label) = 1.0;
    return v;
}

double hard_ce(const Vec& logits, int label) {
    return soft_ce(logits, one_hot(label, static_cast<int>(logits.size())));
}

std::pair<double, double> facemix_weights(const std::string& variant, double kappa) {
    check(kappa >= 0.0 && kappa <= 1.0, "facemix: kappa must be in [0,1]");
    if (variant == "L1") return {1.0 - kappa, 1.0};
    if (variant == "L2") return {1.0, 1.0 - kappa};
    if (variant == "L3") return {kappa, 1.0};
    if (variant == "L4") return {1.0, kappa};
    fail("unknown facemix variant '", variant, "' (expected L1/L2/L3/L4)");
}

double facemix_loss(double l_v, double l_i, double l_j, double kappa,
                    const std::string& variant) {
    const auto [w_v, w_r] = facemix_weights(variant, kappa);
    return w_v * l_v + w_r * (l_i + l_j);
}

double facemix_pair_loss(const nn::ModelState& s, const Mat& patches_i, int yi,
                         const Mat& patches_j, int yj, double lambda, double kappa,
                         const std::string& variant, nn::ModelGrads* grads) {
    check(lambda >= 0.0 && lambda <= 1.0, "facemix: lambda must be in [0,1]");
    const int classes = s.config().class_count;
    const auto [w_v, w_r] = facemix_weights(variant, kappa);

    const Mat mixed = lambda * patches_i + (1.0 - lambda) * patches_j;
    const Vec y_mix = lambda * one_hot(yi, classes) + (1.0 - lambda) * one_hot(yj, classes);

    nn::VitCache cache;
    const Vec logits_v = nn::classify_forward(s, mixed, cache);
    const double l_v = soft_ce(logits_v, y_mix);
    if (grads)
        nn::classify_backward_patches(s, cache, Vec(w_v * soft_ce_grad(logits_v, y_mix)),
                                      *grads, nullptr);

    const Vec logits_i = nn::classify_forward(s, patches_i, cache);
    const double l_i = hard_ce(logits_i, yi);
    if (grads)
        nn::classify_backward_patches(
            s, cache, Vec(w_r * soft_ce_grad(logits_i, one_hot(yi, classes))), *grads, nullptr);

    const Vec logits_j = nn::classify_forward(s, patches_j, cache);
    const double l_j = hard_ce(logits_j, yj);
    if (grads)
        nn::classify_backward_patches(
            s, cache, Vec(w_r * soft_ce_grad(logits_j, one_hot(yj, classes))), *grads, nullptr);

    return w_v * l_v + w_r * (l_i + l_j);
}

int effective_epochs(const SupervisedConfig& cfg, int labeled_count) {
    if (cfg.auto_extend_small_labels && labeled_count < cfg.small_label_threshold)
        return cfg.epochs * cfg.extend_factor;
    return cfg.epochs;
}

namespace {

// fixed-point-free permutation by reshuffling (cheap for batch >= 2)
std::vector<int> derangement(int n, Rng& rng) {
    std::vector<int> p(n);
    for (;;) {
        for (int i = 0; i < n; ++i) p[i] = i;
        rng.shuffle(p);
        bool ok = true;
        for (int i = 0; i < n; ++i)
            if (p[i] == i) ok = false;
        if (ok) return p;
    }
}

void check_labels(const std::vector<ImageSample>& batch, int classes, const char* who) {
    for (const auto& s : batch) {
        check(s.label.has_value(),
              std::string(who) + ": unlabeled sample '" + s.id + "' in labeled set");
        check(*s.label >= 0 && *s.label < classes,
              std::string(who) + ": label out of range on '" + s.id + "'");
    }
}

}  // namespace

double facemix_batch_loss(const nn::ModelState& s, const std::vector<ImageSample>& batch,
                          Mixing mode, const std::string& variant, aug::KappaMetric metric,
                          double alpha, const data::BoxProvider& provider, uint64_t seed,
                          nn::ModelGrads* grads, const std::vector<ImageSample>* kappa_ref) {
    const nn::ModelConfig& mcfg = s.config();
    const int n = static_cast<int>(batch.size());
    check(n > 0, "facemix: empty batch");
    check_labels(batch, mcfg.class_count, "facemix");
    if (kappa_ref)
        check(kappa_ref->size() == batch.size(), "facemix: kappa_ref size mismatch");
    const std::vector<ImageSample>& kref = kappa_ref ? *kappa_ref : batch;

    std::vector<Mat> patches(n);
    parallel_chunks(n, [&](int, int begin, int end) {
        for (int k = begin; k < end; ++k)
            patches[k] = nn::patchify(batch[k].pixels, mcfg.patch_size);
    });

    const bool mixing = mode != Mixing::none && n >= 2;
    if (mode != Mixing::none && n == 1) {
        static std::atomic<bool> warned{false};
        if (!warned.exchange(true))
            log_warn("facemix: batch of one sample, falling back to plain cross entropy");
    }

    std::vector<int> perm;
    std::vector<double> lambdas, wv;
    std::vector<double> real_w(n, 1.0);
    if (mixing) {
        check(alpha > 0.0, "facemix: alpha must be positive");
        Rng rng(seed);
        perm = derangement(n, rng);
        lambdas.resize(n);
        for (int k = 0; k < n; ++k) lambdas[k] = rng.beta(alpha, alpha);
        wv.resize(n);
        std::fill(real_w.begin(), real_w.end(), 0.0);
        for (int k = 0; k < n; ++k) {
            const double kap = mode == Mixing::mixup
                                   ? 0.0
                                   : aug::kappa(kref[k], kref[perm[k]], metric, provider);
            const auto [w_v, w_r] = mode == Mixing::mixup
                                        ? std::pair{1.0, 0.0}
                                        : facemix_weights(variant, kap);
            wv[k] = w_v;
            real_w[k] += w_r;
            real_w[perm[k]] += w_r;
        }
    }

    const int nchunks = chunk_count(n);
    std::vector<nn::ModelGrads> cg(grads ? nchunks : 0);
    std::vector<double> cl(nchunks, 0.0);

    parallel_chunks(n, [&](int ci, int begin, int end) {
        if (grads) cg[ci] = nn::ModelGrads(s);
        nn::VitCache cache;
        for (int k = begin; k < end; ++k) {
            const int yi = *batch[k].label;
            // real-image term; its weight sums this sample's share of every
            // pair it appears in (1 when mixing is off)
            if (real_w[k] != 0.0) {
                const Vec logits = nn::classify_forward(s, patches[k], cache);
                cl[ci] += real_w[k] * hard_ce(logits, yi);
                if (grads)
                    nn::classify_backward_patches(
                        s, cache,
                        Vec(real_w[k] / n * soft_ce_grad(logits, one_hot(yi, mcfg.class_count))),
                        cg[ci], nullptr);
            }
            if (mixing) {
                const int j = perm[k];
                const int yj = *batch[j].label;
                const Mat mixed = lambdas[k] * patches[k] + (1.0 - lambdas[k]) * patches[j];
                const Vec y_mix = lambdas[k] * one_hot(yi, mcfg.class_count) +
                                  (1.0 - lambdas[k]) * one_hot(yj, mcfg.class_count);
                const Vec logits_v = nn::classify_forward(s, mixed, cache);
                cl[ci] += wv[k] * soft_ce(logits_v, y_mix);
                if (grads)
                    nn::classify_backward_patches(s, cache,
                                                  Vec(wv[k] / n * soft_ce_grad(logits_v, y_mix)),
                                                  cg[ci], nullptr);
            }
        }
    });

    double loss = 0.0;
    for (int ci = 0; ci < nchunks; ++ci) {
        loss += cl[ci];
        if (grads) grads->add_scaled(cg[ci], 1.0);
    }
    return loss / n;
}

SupervisedResult run_supervised(const SupervisedConfig& cfg, const nn::ModelState& init_state,
                                const std::vector<ImageSample>& labeled,
                                const std::vector<ImageSample>& eval_set,
                                const data::BoxProvider& boxes, uint64_t seed,
                                const std::string& out_dir) {
    const nn::ModelConfig& mcfg = init_state.config();
    check(cfg.epochs >= 0, "supervised: negative epoch count");
    check(cfg.batch_size >= 1, "supervised: batch_size must be >= 1");
    check(cfg.min_lr <= cfg.base_lr, "supervised: min_lr above base_lr");
    check(!labeled.empty() || cfg.epochs == 0, "supervised: no labeled samples");
    check_labels(labeled, mcfg.class_count, "supervised");

    const int n = static_cast<int>(labeled.size());
    const int epochs = effective_epochs(cfg, n);
    const int steps_per_epoch = n > 0 ? (n + cfg.batch_size - 1) / cfg.batch_size : 0;
    const nn::LrSchedule sched{cfg.base_lr, cfg.min_lr, cfg.warmup_init_lr,
                               cfg.warmup_epochs * steps_per_epoch,
                               std::max(1, epochs * steps_per_epoch)};

    SupervisedResult res;
    res.state = init_state;
    nn::AdamW opt(res.state, {cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay});

    Rng master(derive_seed(seed, 2));
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    nn::ModelGrads grads(res.state);
    int global_step = 0;
    res.best_acc = -1.0;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        master.shuffle(order);
        double epoch_loss = 0.0;
        double last_lr = 0.0;
        for (int b = 0; b < steps_per_epoch; ++b) {
            const int lo = b * cfg.batch_size;
            const int hi = std::min(n, lo + cfg.batch_size);
            const int bs = hi - lo;

            std::vector<uint64_t> aug_seeds(bs);
            for (auto& v : aug_seeds) v = master.next_u64();
            const uint64_t mix_seed = master.next_u64();

            std::vector<ImageSample> views(bs), sources(bs);
            parallel_chunks(bs, [&](int, int begin, int end) {
                for (int k = begin; k < end; ++k) {
                    sources[k] = labeled[order[lo + k]];
                    views[k] = sources[k];
                    views[k].pixels =
                        aug::apply_augment(cfg.weak_aug, sources[k].pixels, aug_seeds[k]);
                }
            });

            grads.zero();
            const double batch_loss =
                facemix_batch_loss(res.state, views, cfg.mixing, cfg.facemix_variant,
                                   cfg.kappa_metric, cfg.mixup_alpha, boxes, mix_seed, &grads,
                                   &sources);
            if (!std::isfinite(batch_loss))
                fail("supervised: non-finite loss at epoch ", std::to_string(epoch + 1),
                     " (training diverged)");

            last_lr = sched.at(global_step);
            opt.step(res.state, grads, last_lr);
            ++global_step;
            epoch_loss += batch_loss;
        }

        SupEpochStat stat;
        stat.epoch = epoch + 1;
        stat.lr = last_lr;
        stat.loss = epoch_loss / std::max(1, steps_per_epoch);
        stat.eval_acc =
            eval_set.empty() ? 0.0 : evalkit::evaluate(res.state, eval_set).accuracy;
        res.history.push_back(stat);
        if (stat.eval_acc > res.best_acc) {
            res.best_acc = stat.eval_acc;
            res.best_epoch = stat.epoch;
            res.best_state = res.state;
        }
    }
    if (res.best_epoch == 0) {  // no epochs ran
        res.best_state = res.state;
        res.best_acc = eval_set.empty() ? 0.0 : evalkit::evaluate(res.state, eval_set).accuracy;
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        res.log_csv = (fs::path(out_dir) / "supervised_log.csv").string();
        CsvWriter csv(res.log_csv, {"epoch", "lr", "loss", "eval_acc"});
        for (const auto& e : res.history)
            csv.write_row({static_cast<double>(e.epoch), e.lr, e.loss, e.eval_acc});
        nn::CheckpointMeta meta{"supervised", epochs, {}};
        if (!res.history.empty()) {
            meta.metrics["final_loss"] = res.history.back().loss;
            meta.metrics["final_eval_acc"] = res.history.back().eval_acc;
        }
        meta.metrics["best_eval_acc"] = res.best_acc;
        res.checkpoint_json = nn::save_checkpoint(
            res.state, (fs::path(out_dir) / "supervised_final").string(), meta);
        nn::CheckpointMeta best_meta{"supervised", res.best_epoch, meta.metrics};
        res.best_checkpoint_json = nn::save_checkpoint(
            res.best_state, (fs::path(out_dir) / "supervised_best").string(), best_meta);
    }
    return res;
}

}  // namespace ssfer::supervised
