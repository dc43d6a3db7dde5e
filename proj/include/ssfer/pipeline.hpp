#pragma once

#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "ssfer/config.hpp"
#include "ssfer/dataset.hpp"
#include "ssfer/evalkit.hpp"

namespace ssfer::pipeline {

// the run seed fans out through these fixed ordinals, so skipping one stage
// never shifts another stage's randomness
namespace seed_ord {
inline constexpr uint64_t data_gen = 0;
inline constexpr uint64_t pretrain = 1;    // consumed inside run_pretrain
inline constexpr uint64_t supervised = 2;  // consumed inside run_supervised
inline constexpr uint64_t semisup = 3;     // consumed inside run_semisup
inline constexpr uint64_t hpo_proxy = 4;   // consumed inside lr_search
inline constexpr uint64_t hpo_search = 5;  // consumed inside lr_search
inline constexpr uint64_t test_split = 6;
inline constexpr uint64_t subsample = 7;
inline constexpr uint64_t noise = 8;
inline constexpr uint64_t kfold = 9;
}  // namespace seed_ord

struct StageFlags {
    bool a = true;  // pretrain
    bool b = true;  // supervised fine-tune
    bool c = true;  // semi-supervised fine-tune
};

struct StageOutcome {
    std::string name;
    std::string checkpoint;  // manifest path, relative to output_dir
    std::map<std::string, double> metrics;
    double seconds = 0.0;
};

struct RunManifest {
    std::string code_version;
    uint64_t seed = 0;
    nlohmann::json config_snapshot;
    std::vector<StageOutcome> stages;
    std::map<std::string, double> final_metrics;
    std::vector<std::string> artifacts;  // relative to output_dir
    double seconds = 0.0;
};

nlohmann::json manifest_to_json(const RunManifest& m);

struct PreparedData {
    data::DatasetSplit split;
    std::vector<data::SynthSample> detailed;  // synth source only
    data::BoxProvider boxes;
};

PreparedData prepare_data(const config::TrainConfig& cfg);

// refuses a non-empty directory unless overwrite is set, then creates it
void claim_output_dir(const std::string& dir, bool overwrite);

// metrics.json + confusion.csv + confusion.png; returns the paths written
std::vector<std::string> write_eval_report(const evalkit::MetricsReport& r,
                                           const std::string& out_dir);

// newest stage checkpoint under a run directory (semisup, then supervised,
// then pretrain); empty string when none exists
std::string find_latest_checkpoint(const std::string& out_dir);

RunManifest run_pipeline(const config::TrainConfig& cfg, const StageFlags& flags,
                         bool overwrite);

}  // namespace ssfer::pipeline
