#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ssfer/dataset.hpp"
#include "ssfer/model.hpp"

namespace ssfer::pretrain {

struct PretrainConfig {
    int epochs = 600;
    int warmup_epochs = 50;
    double base_lr = 3.4e-4;
    int batch_size = 256;
    double mask_ratio = 0.75;
    bool normalize_targets = true;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.95;
};

// per-patch regression targets; normalized mode standardizes each patch row
// by its own mean/variance
Mat recon_targets(const Mat& patches, bool normalize);

// mean squared error over the masked rows only
double recon_loss(const Mat& pred, const Mat& target, const nn::MaskPattern& mask);
Mat recon_loss_grad(const Mat& pred, const Mat& target, const nn::MaskPattern& mask);

struct EpochStat {
    int epoch = 0;  // 1-based
    double lr = 0.0;
    double loss = 0.0;
};

struct PretrainResult {
    nn::ModelState state;
    std::vector<EpochStat> history;
    std::string checkpoint_json;  // empty when out_dir was empty
    std::string log_csv;
};

// called once per optimizer step
using StepObserver = std::function<void(int epoch, int step, int masked_count, double loss)>;

PretrainResult run_pretrain(const PretrainConfig& cfg, const nn::ModelConfig& mcfg,
                            const std::vector<ImageSample>& images, uint64_t seed,
                            const std::string& out_dir, const StepObserver& observer = {});

struct MaskRatioRow {
    double ratio = 0.0;
    double masked_mse = 0.0;      // reconstruction error over masked patches
    double expression_mse = 0.0;  // pixel error over eye/mouth pixels in masked patches
};

// trains one model per ratio (identical init/seed), evaluates reconstruction
// on a held-out tail of the samples, writes per-ratio grid PNGs plus a CSV
std::vector<MaskRatioRow> mask_ratio_study(const std::vector<double>& ratios,
                                           const PretrainConfig& cfg,
                                           const nn::ModelConfig& mcfg,
                                           const std::vector<data::SynthSample>& samples,
                                           uint64_t seed, const std::string& out_dir);

}  // namespace ssfer::pretrain
