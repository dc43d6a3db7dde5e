#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <string>

#include "ssfer/model.hpp"

namespace ssfer::nn {

struct CheckpointMeta {
    std::string stage = "init";  // init | pretrain | supervised | semisup
    int epoch = 0;
    std::map<std::string, double> metrics;
};

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& where);

// FNV-1a over the canonical (sorted-key) config JSON
std::string model_config_hash(const ModelConfig& cfg);

// writes <prefix>.json (manifest) and <prefix>.bin (little-endian float32
// tensor blob in state order); returns the manifest path.
// save -> load -> save is byte-identical.
std::string save_checkpoint(const ModelState& s, const std::string& prefix,
                            const CheckpointMeta& meta);

ModelState load_checkpoint(const std::string& manifest_path, CheckpointMeta* meta = nullptr);

// chaining guard: error mentioning both hashes when the checkpoint's model
// config differs from the expected one
ModelState load_checkpoint_expect(const std::string& manifest_path, const ModelConfig& expected,
                                  CheckpointMeta* meta = nullptr);

}  // namespace ssfer::nn
