#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssfer/augment.hpp"
#include "ssfer/model.hpp"

namespace ssfer::semisup {

// ema_teacher: pseudo-labels from an exponential moving average of the
// student; fixmatch: pseudo-labels from the live student itself
enum class TeacherMode { ema_teacher, fixmatch };

TeacherMode teacher_mode_from_string(const std::string& name);
std::string to_string(TeacherMode m);

struct SemiSupConfig {
    int epochs = 50;
    int warmup_epochs = 0;
    double base_lr = 1.5e-4;
    double min_lr = 0.0;
    double warmup_init_lr = 0.0;
    int batch_size = 64;  // labeled half of each step
    int unlabeled_batch_size = 64;
    double tau = 0.95;       // pseudo-label confidence gate
    double mu = 1.0;         // unlabeled loss weight
    double momentum = 0.999; // teacher EMA momentum
    TeacherMode mode = TeacherMode::ema_teacher;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    aug::AugmentPolicy weak_aug = aug::weak_policy();
    aug::AugmentPolicy strong_aug = aug::strong_policy();
};

// teacher <- momentum * teacher + (1 - momentum) * student
void ema_update(nn::ModelState& teacher, const nn::ModelState& student, double momentum);

struct PseudoLabel {
    int label = 0;
    double confidence = 0.0;  // softmax mass on the argmax class
};

PseudoLabel pseudo_label(const nn::ModelState& teacher, const Image& weak_view);

// mean over the FULL batch of CE(student logits, pseudo label) on samples
// whose confidence clears tau; accepted flags are written per sample
double unlabeled_loss(const std::vector<Vec>& student_logits,
                      const std::vector<PseudoLabel>& pseudo, double tau,
                      std::vector<uint8_t>* accepted = nullptr);

struct SemiEpochStat {
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    double accept_rate = 0.0;
    double teacher_acc = 0.0;
    double student_acc = 0.0;
};

struct SemiSupResult {
    nn::ModelState student;
    nn::ModelState teacher;
    nn::ModelState final_state;  // teacher for ema_teacher, student for fixmatch
    double final_acc = 0.0;
    std::vector<SemiEpochStat> history;
    std::string checkpoint_json;
    std::string log_csv;
};

SemiSupResult run_semisup(const SemiSupConfig& cfg, const nn::ModelState& init_state,
                          const std::vector<ImageSample>& labeled,
                          const std::vector<ImageSample>& unlabeled,
                          const std::vector<ImageSample>& eval_set, uint64_t seed,
                          const std::string& out_dir);

}  // namespace ssfer::semisup
