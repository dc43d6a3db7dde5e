#pragma once

#include <string>
#include <vector>

#include "ssfer/config.hpp"
#include "ssfer/evalkit.hpp"
#include "ssfer/hpo.hpp"
#include "ssfer/pretrain.hpp"

namespace ssfer::experiments {

std::vector<std::string> experiment_names();

struct KfoldReport {
    std::vector<double> fold_acc;
    double average = 0.0;
};

struct NoiseRow {
    double budget = 0.0;
    std::vector<double> acc;  // one per ratio
    double decline = 0.0;     // acc at first ratio minus acc at last
};

struct NoiseReport {
    std::vector<double> ratios;
    std::vector<NoiseRow> rows;  // one per budget
};

struct AttackReport {
    double clean_acc = 0.0;
    int images = 0;
    evalkit::AttackResult table;
};

struct MaskRatioReport {
    std::vector<pretrain::MaskRatioRow> rows;
};

struct HpoReport {
    hpo::LrSearchResult search;
};

struct CompareRow {
    uint64_t seed = 0;
    double ema = 0.0;
    double fixmatch = 0.0;
};

struct CompareReport {
    std::vector<CompareRow> rows;
    double ema_mean = 0.0;
    double fixmatch_mean = 0.0;
};

struct ComponentsReport {
    std::vector<std::string> arms;          // baseline, +facemix, +ema, +both
    std::vector<std::vector<double>> acc;   // [arm][seed]
    std::vector<double> mean;               // per arm
};

// each runner trains whatever its design needs and, when cfg.output_dir is
// set, writes its table as CSV + JSON + PNG there
KfoldReport run_kfold(const config::TrainConfig& cfg);
NoiseReport run_noise(const config::TrainConfig& cfg);
AttackReport run_attack(const config::TrainConfig& cfg);
MaskRatioReport run_maskratio(const config::TrainConfig& cfg);
HpoReport run_hpo(const config::TrainConfig& cfg);
CompareReport run_semicompare(const config::TrainConfig& cfg);
ComponentsReport run_components(const config::TrainConfig& cfg);

// claims the output dir, snapshots the config, dispatches by name
void run_experiment(const std::string& name, const config::TrainConfig& cfg, bool overwrite);

}  // namespace ssfer::experiments
