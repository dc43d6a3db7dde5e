#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ssfer/dataset.hpp"
#include "ssfer/model.hpp"

namespace testutil {

// smallest config the model code accepts; 16px faces, 16 patches
inline ssfer::nn::ModelConfig micro_model(int classes = 3) {
    ssfer::nn::ModelConfig c;
    c.image_size = 16;
    c.patch_size = 4;
    c.embed_dim = 16;
    c.depth = 1;
    c.heads = 2;
    c.mlp_ratio = 2.0;
    c.decoder_embed_dim = 12;
    c.decoder_depth = 1;
    c.decoder_heads = 2;
    c.class_count = classes;
    return c;
}

inline std::vector<ssfer::ImageSample> micro_faces(int n, int classes = 3, uint64_t seed = 0,
                                                   int size = 16, double jitter = 0.3) {
    ssfer::data::SynthSpec spec;
    spec.n_samples = n;
    spec.class_count = classes;
    spec.image_size = size;
    spec.jitter = jitter;
    spec.seed = seed;
    return ssfer::data::synth_generate(spec);
}

// fresh (emptied) scratch directory keyed by tag
inline std::filesystem::path temp_dir(const std::string& tag) {
    const auto p = std::filesystem::temp_directory_path() / ("ssfer_test_" + tag);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline bool states_equal(const ssfer::nn::ModelState& a, const ssfer::nn::ModelState& b) {
    if (a.tensor_count() != b.tensor_count()) return false;
    if (a.names() != b.names()) return false;
    for (int i = 0; i < a.tensor_count(); ++i) {
        const auto& ta = a.param(i);
        const auto& tb = b.param(i);
        if (ta.rows() != tb.rows() || ta.cols() != tb.cols()) return false;
        if ((ta.array() != tb.array()).any()) return false;
    }
    return true;
}

}  // namespace testutil
