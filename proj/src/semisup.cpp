#include "ssfer/semisup.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "ssfer/csv.hpp"
#include "ssfer/checkpoint.hpp"
#include "ssfer/evalkit.hpp"
#include "ssfer/optimizer.hpp"
#include "ssfer/rng.hpp"
#include "ssfer/supervised.hpp"
#include "ssfer/threading.hpp"

namespace fs = std::filesystem;

namespace ssfer::semisup {

TeacherMode teacher_mode_from_string(const std::string& name) {
    if (name == "ema_teacher" || name == "ema") return TeacherMode::ema_teacher;
    if (name == "fixmatch") return TeacherMode::fixmatch;
    fail("unknown teacher mode '", name, "' (expected ema_teacher/fixmatch)");
}

std::string to_string(TeacherMode m) {
    return m == TeacherMode::ema_teacher ? "ema_teacher" : "fixmatch";
}

void ema_update(nn::ModelState& teacher, const nn::ModelState& student, double momentum) {
    check(momentum >= 0.0 && momentum <= 1.0, "ema: momentum must be in [0,1]");
    check(teacher.config() == student.config(), "ema: model shape mismatch");
    for (int i = 0; i < teacher.tensor_count(); ++i)
        teacher.param(i) = momentum * teacher.param(i) + (1.0 - momentum) * student.param(i);
}

PseudoLabel pseudo_label(const nn::ModelState& teacher, const Image& weak_view) {
    const Vec probs = nn::softmax(nn::classify(teacher, weak_view));
    PseudoLabel p;
    for (int c = 1; c < probs.size(); ++c)
        if (probs(c) > probs(p.label)) p.label = c;
    p.confidence = probs(p.label);
    return p;
}

double unlabeled_loss(const std::vector<Vec>& student_logits,
                      const std::vector<PseudoLabel>& pseudo, double tau,
                      std::vector<uint8_t>* accepted) {
    check(student_logits.size() == pseudo.size(), "unlabeled_loss: size mismatch");
    if (accepted) accepted->assign(student_logits.size(), 0);
    if (student_logits.empty()) return 0.0;
    double total = 0.0;
    for (size_t i = 0; i < student_logits.size(); ++i) {
        if (pseudo[i].confidence <= tau) continue;
        total += supervised::hard_ce(student_logits[i], pseudo[i].label);
        if (accepted) (*accepted)[i] = 1;
    }
    return total / static_cast<double>(student_logits.size());
}

SemiSupResult run_semisup(const SemiSupConfig& cfg, const nn::ModelState& init_state,
                          const std::vector<ImageSample>& labeled,
                          const std::vector<ImageSample>& unlabeled,
                          const std::vector<ImageSample>& eval_set, uint64_t seed,
                          const std::string& out_dir) {
    const nn::ModelConfig& mcfg = init_state.config();
    check(cfg.epochs >= 0, "semisup: negative epoch count");
    check(cfg.batch_size >= 1 && cfg.unlabeled_batch_size >= 1,
          "semisup: batch sizes must be >= 1");
    check(cfg.tau > 0.0 && cfg.tau < 1.0, "semisup: tau must be in (0,1)");
    check(cfg.mu >= 0.0, "semisup: mu must be >= 0");
    check(!labeled.empty() || cfg.epochs == 0, "semisup: no labeled samples");
    for (const auto& s : labeled) {
        check(s.label.has_value(), "semisup: unlabeled sample '" + s.id + "' in labeled set");
        check(*s.label >= 0 && *s.label < mcfg.class_count,
              "semisup: label out of range on '" + s.id + "'");
    }

    const int nl = static_cast<int>(labeled.size());
    const int nu = static_cast<int>(unlabeled.size());
    if (nu == 0 && cfg.epochs > 0)
        log_warn("semisup: no unlabeled samples, running on the labeled set alone");

    const int steps_per_epoch =
        nu > 0 ? (nu + cfg.unlabeled_batch_size - 1) / cfg.unlabeled_batch_size
               : (nl > 0 ? (nl + cfg.batch_size - 1) / cfg.batch_size : 0);
    const nn::LrSchedule sched{cfg.base_lr, cfg.min_lr, cfg.warmup_init_lr,
                               cfg.warmup_epochs * steps_per_epoch,
                               std::max(1, cfg.epochs * steps_per_epoch)};

    SemiSupResult res;
    res.student = init_state;
    res.teacher = init_state;
    nn::AdamW opt(res.student, {cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay});
    Rng master(derive_seed(seed, 3));

    std::vector<int> lab_order(nl), unlab_order(nu);
    for (int i = 0; i < nl; ++i) lab_order[i] = i;
    for (int i = 0; i < nu; ++i) unlab_order[i] = i;
    master.shuffle(lab_order);
    int lab_cursor = 0;

    nn::ModelGrads grads(res.student);
    int global_step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        master.shuffle(unlab_order);
        double epoch_loss = 0.0;
        double last_lr = 0.0;
        int64_t epoch_accepted = 0, epoch_unlabeled = 0;

        for (int b = 0; b < steps_per_epoch; ++b) {
            // labeled slice cycles; unlabeled slice walks the epoch order
            std::vector<int> lab_batch(std::min(cfg.batch_size, nl));
            for (int& idx : lab_batch) {
                if (lab_cursor == nl) {
                    master.shuffle(lab_order);
                    lab_cursor = 0;
                }
                idx = lab_order[lab_cursor++];
            }
            const int ub_lo = nu > 0 ? b * cfg.unlabeled_batch_size : 0;
            const int ub_hi = nu > 0 ? std::min(nu, ub_lo + cfg.unlabeled_batch_size) : 0;
            const int nb_l = static_cast<int>(lab_batch.size());
            const int nb_u = ub_hi - ub_lo;

            // all augment seeds for the step come out of the master stream in
            // a fixed order, so the draws never depend on image content
            std::vector<uint64_t> lab_seeds(nb_l);
            for (auto& s : lab_seeds) s = master.next_u64();
            std::vector<uint64_t> weak_seeds(nb_u), strong_seeds(nb_u);
            for (int k = 0; k < nb_u; ++k) {
                weak_seeds[k] = master.next_u64();
                strong_seeds[k] = master.next_u64();
            }

            grads.zero();
            double l_l = 0.0;
            {
                const int nchunks = chunk_count(nb_l);
                std::vector<nn::ModelGrads> cg(nchunks);
                std::vector<double> cl(nchunks, 0.0);
                parallel_chunks(nb_l, [&](int ci, int begin, int end) {
                    cg[ci] = nn::ModelGrads(res.student);
                    nn::VitCache cache;
                    for (int k = begin; k < end; ++k) {
                        const ImageSample& s = labeled[lab_batch[k]];
                        const Image view = aug::apply_augment(cfg.weak_aug, s.pixels, lab_seeds[k]);
                        const Vec logits = nn::classify_forward(res.student, view, cache);
                        cl[ci] += supervised::hard_ce(logits, *s.label);
                        nn::classify_backward(
                            res.student, cache,
                            Vec(supervised::soft_ce_grad(
                                    logits, supervised::one_hot(*s.label, mcfg.class_count)) /
                                nb_l),
                            cg[ci], nullptr);
                    }
                });
                for (int ci = 0; ci < nchunks; ++ci) {
                    grads.add_scaled(cg[ci], 1.0);
                    l_l += cl[ci];
                }
                l_l /= std::max(1, nb_l);
            }

            double l_u = 0.0;
            if (nb_u > 0) {
                const nn::ModelState& labeler =
                    cfg.mode == TeacherMode::ema_teacher ? res.teacher : res.student;
                const int nchunks = chunk_count(nb_u);
                std::vector<nn::ModelGrads> cg(nchunks);
                std::vector<double> cl(nchunks, 0.0);
                std::vector<int64_t> cacc(nchunks, 0);
                parallel_chunks(nb_u, [&](int ci, int begin, int end) {
                    cg[ci] = nn::ModelGrads(res.student);
                    nn::VitCache cache;
                    for (int k = begin; k < end; ++k) {
                        const ImageSample& s = unlabeled[unlab_order[ub_lo + k]];
                        const Image weak = aug::apply_augment(cfg.weak_aug, s.pixels,
                                                              weak_seeds[k]);
                        const PseudoLabel p = pseudo_label(labeler, weak);
                        if (p.confidence <= cfg.tau) continue;
                        ++cacc[ci];
                        const Image strong = aug::apply_augment(cfg.strong_aug, s.pixels,
                                                                strong_seeds[k]);
                        const Vec logits = nn::classify_forward(res.student, strong, cache);
                        cl[ci] += supervised::hard_ce(logits, p.label);
                        if (cfg.mu != 0.0)
                            nn::classify_backward(
                                res.student, cache,
                                Vec(cfg.mu *
                                    supervised::soft_ce_grad(
                                        logits, supervised::one_hot(p.label, mcfg.class_count)) /
                                    nb_u),
                                cg[ci], nullptr);
                    }
                });
                for (int ci = 0; ci < nchunks; ++ci) {
                    if (cfg.mu != 0.0) grads.add_scaled(cg[ci], 1.0);
                    l_u += cl[ci];
                    epoch_accepted += cacc[ci];
                }
                l_u /= nb_u;
                epoch_unlabeled += nb_u;
            }

            const double step_loss = l_l + cfg.mu * l_u;
            if (!std::isfinite(step_loss))
                fail("semisup: non-finite loss at epoch ", std::to_string(epoch + 1),
                     " (training diverged)");
            last_lr = sched.at(global_step);
            opt.step(res.student, grads, last_lr);
            ++global_step;
            if (cfg.mode == TeacherMode::ema_teacher)
                ema_update(res.teacher, res.student, cfg.momentum);
            epoch_loss += step_loss;
        }

        SemiEpochStat stat;
        stat.epoch = epoch + 1;
        stat.lr = last_lr;
        stat.loss = epoch_loss / std::max(1, steps_per_epoch);
        stat.accept_rate = epoch_unlabeled > 0
                               ? static_cast<double>(epoch_accepted) / epoch_unlabeled
                               : 0.0;
        if (!eval_set.empty()) {
            stat.student_acc = evalkit::evaluate(res.student, eval_set).accuracy;
            stat.teacher_acc = cfg.mode == TeacherMode::ema_teacher
                                   ? evalkit::evaluate(res.teacher, eval_set).accuracy
                                   : stat.student_acc;
        }
        res.history.push_back(stat);
    }

    if (cfg.mode == TeacherMode::fixmatch) res.teacher = res.student;
    res.final_state = cfg.mode == TeacherMode::ema_teacher ? res.teacher : res.student;
    res.final_acc = res.history.empty()
                        ? (eval_set.empty() ? 0.0
                                            : evalkit::evaluate(res.final_state, eval_set).accuracy)
                        : (cfg.mode == TeacherMode::ema_teacher ? res.history.back().teacher_acc
                                                                : res.history.back().student_acc);

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        res.log_csv = (fs::path(out_dir) / "semisup_log.csv").string();
        CsvWriter csv(res.log_csv,
                      {"epoch", "lr", "loss", "accept_rate", "teacher_acc", "student_acc"});
        for (const auto& e : res.history)
            csv.write_row({static_cast<double>(e.epoch), e.lr, e.loss, e.accept_rate,
                           e.teacher_acc, e.student_acc});
        nn::CheckpointMeta meta{"semisup", cfg.epochs, {}};
        if (!res.history.empty()) {
            meta.metrics["final_loss"] = res.history.back().loss;
            meta.metrics["final_accept_rate"] = res.history.back().accept_rate;
        }
        meta.metrics["final_acc"] = res.final_acc;
        res.checkpoint_json = nn::save_checkpoint(
            res.final_state, (fs::path(out_dir) / "semisup_final").string(), meta);
    }
    return res;
}

}  // namespace ssfer::semisup
