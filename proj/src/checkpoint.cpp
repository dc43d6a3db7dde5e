#include "ssfer/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

using json = nlohmann::json;

namespace ssfer::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs assume a little-endian host");

json model_config_to_json(const ModelConfig& c) {
    return json{{"image_size", c.image_size},
                {"patch_size", c.patch_size},
                {"channels", c.channels},
                {"embed_dim", c.embed_dim},
                {"depth", c.depth},
                {"heads", c.heads},
                {"mlp_ratio", c.mlp_ratio},
                {"decoder_embed_dim", c.decoder_embed_dim},
                {"decoder_depth", c.decoder_depth},
                {"decoder_heads", c.decoder_heads},
                {"class_count", c.class_count},
                {"mask_ratio", c.mask_ratio}};
}

ModelConfig model_config_from_json(const json& j, const std::string& where) {
    check(j.is_object(), where + ": model config must be an object");
    ModelConfig c;
    const std::map<std::string, std::function<void(const json&)>> fields = {
        {"image_size", [&](const json& v) { c.image_size = v.get<int>(); }},
        {"patch_size", [&](const json& v) { c.patch_size = v.get<int>(); }},
        {"channels", [&](const json& v) { c.channels = v.get<int>(); }},
        {"embed_dim", [&](const json& v) { c.embed_dim = v.get<int>(); }},
        {"depth", [&](const json& v) { c.depth = v.get<int>(); }},
        {"heads", [&](const json& v) { c.heads = v.get<int>(); }},
        {"mlp_ratio", [&](const json& v) { c.mlp_ratio = v.get<double>(); }},
        {"decoder_embed_dim", [&](const json& v) { c.decoder_embed_dim = v.get<int>(); }},
        {"decoder_depth", [&](const json& v) { c.decoder_depth = v.get<int>(); }},
        {"decoder_heads", [&](const json& v) { c.decoder_heads = v.get<int>(); }},
        {"class_count", [&](const json& v) { c.class_count = v.get<int>(); }},
        {"mask_ratio", [&](const json& v) { c.mask_ratio = v.get<double>(); }},
    };
    for (const auto& [key, value] : j.items()) {
        auto it = fields.find(key);
        if (it == fields.end()) fail(where, ": unknown model key '", key, "'");
        try {
            it->second(value);
        } catch (const json::exception&) {
            fail(where, ": bad value for model key '", key, "'");
        }
    }
    c.validate();
    return c;
}

std::string model_config_hash(const ModelConfig& cfg) {
    const std::string canon = model_config_to_json(cfg).dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canon) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string save_checkpoint(const ModelState& s, const std::string& prefix,
                            const CheckpointMeta& meta) {
    const std::string blob_path = prefix + ".bin";
    const std::string json_path = prefix + ".json";

    json tensors = json::array();
    int64_t offset = 0;
    {
        std::ofstream blob(blob_path, std::ios::binary);
        check(blob.good(), "save_checkpoint: cannot open " + blob_path);
        std::vector<float> buf;
        for (int i = 0; i < s.tensor_count(); ++i) {
            const Mat& m = s.param(i);
            tensors.push_back(json{{"name", s.names()[i]},
                                   {"rows", m.rows()},
                                   {"cols", m.cols()},
                                   {"offset", offset}});
            buf.resize(static_cast<size_t>(m.size()));
            size_t k = 0;
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c)
                    buf[k++] = static_cast<float>(m(r, c));
            blob.write(reinterpret_cast<const char*>(buf.data()),
                       static_cast<std::streamsize>(buf.size() * sizeof(float)));
            offset += m.size();
        }
        check(blob.good(), "save_checkpoint: write failed for " + blob_path);
    }

    json manifest;
    manifest["format"] = "ssfer-checkpoint-v1";
    manifest["dtype"] = "f32le";
    manifest["model"] = model_config_to_json(s.config());
    manifest["model_hash"] = model_config_hash(s.config());
    manifest["stage"] = meta.stage;
    manifest["epoch"] = meta.epoch;
    manifest["metrics"] = meta.metrics;
    manifest["blob"] = std::filesystem::path(blob_path).filename().string();
    manifest["scalars"] = offset;
    manifest["tensors"] = std::move(tensors);

    std::ofstream out(json_path);
    check(out.good(), "save_checkpoint: cannot open " + json_path);
    out << manifest.dump(2) << '\n';
    check(out.good(), "save_checkpoint: write failed for " + json_path);
    return json_path;
}

ModelState load_checkpoint(const std::string& manifest_path, CheckpointMeta* meta) {
    std::ifstream in(manifest_path);
    if (!in) fail("load_checkpoint: cannot open ", manifest_path);
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        fail("load_checkpoint: invalid JSON in ", manifest_path, ": ", e.what());
    }
    check(manifest.value("format", "") == "ssfer-checkpoint-v1",
          "load_checkpoint: unrecognized format in " + manifest_path);
    check(manifest.value("dtype", "") == "f32le",
          "load_checkpoint: unsupported dtype in " + manifest_path);

    const ModelConfig cfg = model_config_from_json(manifest.at("model"), "load_checkpoint");
    ModelState s = ModelState::zeros_like(cfg);

    const auto& tensors = manifest.at("tensors");
    check(tensors.is_array() && static_cast<int>(tensors.size()) == s.tensor_count(),
          "load_checkpoint: tensor table does not match the model layout");

    const std::string blob_path =
        (std::filesystem::path(manifest_path).parent_path() /
         manifest.at("blob").get<std::string>())
            .string();
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) fail("load_checkpoint: cannot open blob ", blob_path);

    std::vector<float> buf;
    for (int i = 0; i < s.tensor_count(); ++i) {
        const auto& t = tensors[i];
        Mat& m = s.param(i);
        if (t.at("name").get<std::string>() != s.names()[i] ||
            t.at("rows").get<Eigen::Index>() != m.rows() ||
            t.at("cols").get<Eigen::Index>() != m.cols())
            fail("load_checkpoint: tensor ", std::to_string(i), " ('", s.names()[i],
                 "') does not match the manifest entry");
        buf.resize(static_cast<size_t>(m.size()));
        blob.read(reinterpret_cast<char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
        check(blob.good(), "load_checkpoint: blob truncated at tensor " + s.names()[i]);
        size_t k = 0;
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = buf[k++];
    }
    if (meta) {
        meta->stage = manifest.value("stage", "init");
        meta->epoch = manifest.value("epoch", 0);
        meta->metrics.clear();
        if (manifest.contains("metrics"))
            for (const auto& [k, v] : manifest["metrics"].items())
                meta->metrics[k] = v.get<double>();
    }
    return s;
}

ModelState load_checkpoint_expect(const std::string& manifest_path, const ModelConfig& expected,
                                  CheckpointMeta* meta) {
    ModelState s = load_checkpoint(manifest_path, meta);
    if (!(s.config() == expected))
        fail("checkpoint ", manifest_path, " was written for model ",
             model_config_hash(s.config()), " but the run expects model ",
             model_config_hash(expected));
    return s;
}

}  // namespace ssfer::nn
