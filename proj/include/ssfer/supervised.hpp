#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ssfer/augment.hpp"
#include "ssfer/dataset.hpp"
#include "ssfer/model.hpp"

namespace ssfer::supervised {

enum class Mixing { none, mixup, facemix };

Mixing mixing_from_string(const std::string& name);
std::string to_string(Mixing m);

struct SupervisedConfig {
    int epochs = 100;
    int warmup_epochs = 5;
    double base_lr = 1.0e-4;
    double min_lr = 1.0e-5;
    double warmup_init_lr = 5.0e-5;
    int batch_size = 32;
    Mixing mixing = Mixing::facemix;
    std::string facemix_variant = "L4";  // L1..L4 loss combinations
    aug::KappaMetric kappa_metric = aug::KappaMetric::iou;
    double mixup_alpha = 0.2;
    bool auto_extend_small_labels = true;  // small labeled sets train longer
    int small_label_threshold = 500;
    int extend_factor = 10;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    aug::AugmentPolicy weak_aug = aug::weak_policy();
};

// cross entropy against a probability vector; gradient is softmax - target
double soft_ce(const Vec& logits, const Vec& target_probs);
Vec soft_ce_grad(const Vec& logits, const Vec& target_probs);
double hard_ce(const Vec& logits, int label);
Vec one_hot(int label, int classes);

// loss = w_v * L_v + w_r * (L_i + L_j); the variant picks where kappa lands
std::pair<double, double> facemix_weights(const std::string& variant, double kappa);
double facemix_loss(double l_v, double l_i, double l_j, double kappa,
                    const std::string& variant);

// composite loss for one pair at fixed lambda/kappa, gradients accumulated;
// patch matrices mix linearly so this works directly in patch space
double facemix_pair_loss(const nn::ModelState& s, const Mat& patches_i, int yi,
                         const Mat& patches_j, int yj, double lambda, double kappa,
                         const std::string& variant, nn::ModelGrads* grads);

// batch loss: a seeded fixed-point-free shuffle pairs every sample with a
// partner, each pair draws lambda ~ Beta(alpha, alpha) and takes kappa from
// its own boxes/pixels, and the result is the mean over pairs. mixup mode
// forces kappa = 0 and drops the real-image terms. A batch of one falls back
// to plain cross entropy with a warning. kappa_ref, when given, supplies the
// samples kappa is computed from (so the batch can hold augmented views while
// kappa still reflects the source images).
double facemix_batch_loss(const nn::ModelState& s, const std::vector<ImageSample>& batch,
                          Mixing mode, const std::string& variant, aug::KappaMetric metric,
                          double alpha, const data::BoxProvider& provider, uint64_t seed,
                          nn::ModelGrads* grads = nullptr,
                          const std::vector<ImageSample>* kappa_ref = nullptr);

int effective_epochs(const SupervisedConfig& cfg, int labeled_count);

struct SupEpochStat {
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    double eval_acc = 0.0;
};

struct SupervisedResult {
    nn::ModelState state;       // final epoch
    nn::ModelState best_state;  // highest eval accuracy (earliest on ties)
    double best_acc = 0.0;
    int best_epoch = 0;
    std::vector<SupEpochStat> history;
    std::string checkpoint_json;
    std::string best_checkpoint_json;
    std::string log_csv;
};

SupervisedResult run_supervised(const SupervisedConfig& cfg, const nn::ModelState& init_state,
                                const std::vector<ImageSample>& labeled,
                                const std::vector<ImageSample>& eval_set,
                                const data::BoxProvider& boxes, uint64_t seed,
                                const std::string& out_dir);

}  // namespace ssfer::supervised
