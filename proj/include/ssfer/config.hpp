#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "ssfer/augment.hpp"
#include "ssfer/dataset.hpp"
#include "ssfer/model.hpp"
#include "ssfer/pretrain.hpp"
#include "ssfer/semisup.hpp"
#include "ssfer/supervised.hpp"

namespace ssfer::config {

struct SynthConfig {
    int n_samples = 2500;
    int class_count = 3;
    int image_size = 32;
    double jitter = 0.3;
};

struct DataConfig {
    std::string source = "synth";  // synth | manifest
    SynthConfig synth;
    std::string manifest_path;
    double test_fraction = 0.2;
    std::string budget_kind = "fraction";  // per_class | fraction
    double budget_value = 0.1;
    double noise_ratio = 0.0;
    std::string box_provider = "stored";  // stored | full_image | sidecar
    std::string sidecar_path;

    data::LabelBudget budget() const;
    data::BoxProvider make_box_provider() const;
};

struct KfoldConfig {
    int folds = 5;
};

struct NoiseConfig {
    std::vector<double> ratios = {0.0, 0.1, 0.2, 0.3};
    std::vector<double> budgets;  // data.budget_kind units; empty = data.budget_value only
};

struct AttackConfig {
    std::vector<double> epsilons = {0.0, 0.02, 0.04, 0.06, 0.08, 0.10};
    double threshold = 0.3;
    int max_images = 200;  // attack evaluation subset cap
};

struct MaskRatioConfig {
    std::vector<double> ratios = {0.5, 0.75, 0.9};
};

struct HpoConfig {
    int wolves = 6;
    int iterations = 4;
    int proxy_epochs = 5;
    double log10_lo = -6.0;
    double log10_hi = -2.0;
};

struct SeedListConfig {
    std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
};

struct ExperimentsConfig {
    KfoldConfig kfold;
    NoiseConfig noise;
    AttackConfig attack;
    MaskRatioConfig maskratio;
    HpoConfig hpo;
    SeedListConfig semicompare;
    SeedListConfig components;
};

struct TrainConfig {
    uint64_t seed = 0;
    std::string output_dir;
    nn::ModelConfig model = nn::ModelConfig::tiny();
    pretrain::PretrainConfig pretrain;
    supervised::SupervisedConfig supervised;
    semisup::SemiSupConfig semisup;
    DataConfig data;
    ExperimentsConfig experiments;

    void validate() const;
};

TrainConfig default_config();

// strict: unknown keys anywhere are rejected with their full path, and the
// top-level keys seed/output_dir must be present
TrainConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const TrainConfig& cfg);

TrainConfig load_config(const std::string& path);
void save_config(const std::string& path, const TrainConfig& cfg);

}  // namespace ssfer::config
