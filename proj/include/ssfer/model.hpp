#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssfer/common.hpp"
#include "ssfer/image.hpp"

namespace ssfer::nn {

struct ModelConfig {
    int image_size = 32;
    int patch_size = 4;
    int channels = 3;
    int embed_dim = 64;
    int depth = 4;
    int heads = 4;
    double mlp_ratio = 4.0;
    int decoder_embed_dim = 32;
    int decoder_depth = 2;
    int decoder_heads = 4;
    int class_count = 3;
    double mask_ratio = 0.75;

    void validate() const;
    int grid() const { return image_size / patch_size; }
    int n_patches() const { return grid() * grid(); }
    int patch_len() const { return patch_size * patch_size * channels; }
    int mlp_hidden() const { return static_cast<int>(embed_dim * mlp_ratio); }
    int dec_mlp_hidden() const { return static_cast<int>(decoder_embed_dim * mlp_ratio); }

    static ModelConfig tiny();     // 32px/4, d=64, L=4, used by the fast tests
    static ModelConfig base224();  // 224px/16, d=768, L=12
};

bool operator==(const ModelConfig& a, const ModelConfig& b);

// parameters as named matrices in a fixed order (also the checkpoint order)
class ModelState {
public:
    ModelState() = default;
    static ModelState init(const ModelConfig& cfg, uint64_t seed);
    static ModelState zeros_like(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    int tensor_count() const { return static_cast<int>(params_.size()); }
    const std::vector<std::string>& names() const { return names_; }

    Mat& param(int i) { return params_[i]; }
    const Mat& param(int i) const { return params_[i]; }
    Mat& param(const std::string& name) { return params_[index(name)]; }
    const Mat& param(const std::string& name) const { return params_[index(name)]; }
    int index(const std::string& name) const;

    int64_t scalar_count() const;
    bool all_finite() const;

private:
    ModelConfig cfg_;
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    std::vector<Mat> params_;
    friend ModelState make_state_layout(const ModelConfig&);
};

// gradient buffer parallel to a state's tensors; kept separate so per-chunk
// buffers can be reduced in a fixed order
class ModelGrads {
public:
    ModelGrads() = default;
    explicit ModelGrads(const ModelState& s);
    void zero();
    void add_scaled(const ModelGrads& other, double scale);
    void scale(double f);
    Mat& operator[](int i) { return g_[i]; }
    const Mat& operator[](int i) const { return g_[i]; }
    size_t size() const { return g_.size(); }

private:
    std::vector<Mat> g_;
};

// ------------------------------------------------------------- patch ops

// rows = patches in raster order, columns = (dy, dx, channel) within a patch
Mat patchify(const Image& image, int patch_size);
Image unpatchify(const Mat& patches, int patch_size, int image_size, int channels);

struct MaskPattern {
    int n_patches = 0;
    std::vector<int> masked;   // sorted ascending
    std::vector<int> visible;  // sorted ascending complement
};

// exactly floor(mask_ratio * n_patches) masked indices, uniform without
// replacement
MaskPattern sample_mask(int n_patches, double mask_ratio, uint64_t seed);

struct CountResult {
    int64_t params = 0;
    int64_t flops = 0;  // multiply-accumulates of the dense projections
};

// inference model only (encoder + classification head, decoder excluded)
CountResult count_params_flops(const ModelConfig& cfg);

// ------------------------------------------------------------- forward

struct LayerNormCache {
    Mat xhat;
    Vec rstd;
};

struct BlockCache {
    Mat x_in;
    LayerNormCache ln1;
    Mat ln1_out;
    Mat qkv;
    std::vector<Mat> probs;  // per head, rows softmaxed
    Mat attn_concat;
    Mat x_mid;
    LayerNormCache ln2;
    Mat ln2_out;
    Mat fc1_out;  // pre-activation
    Mat act_out;
};

struct VitCache {
    Mat patches;  // patchified input
    std::vector<int> vis_idx;
    Mat enc_in;
    std::vector<BlockCache> enc_blocks;
    LayerNormCache enc_norm;
    Mat enc_out;
    Mat dec_in;
    std::vector<BlockCache> dec_blocks;
    LayerNormCache dec_norm;
    Mat dec_out;
};

// classification path (all patches + class token)
Vec classify_forward(const ModelState& s, const Image& img, VitCache& cache);
Vec classify_forward(const ModelState& s, const Mat& patches, VitCache& cache);
// dpixels, if given, receives dLoss/dInput (shape of img)
void classify_backward(const ModelState& s, const VitCache& cache, const Vec& dlogits,
                       ModelGrads& grads, Image* dpixels = nullptr);
// same, but the input gradient stays in patch-matrix form (keeps gradient
// checks in full double precision)
void classify_backward_patches(const ModelState& s, const VitCache& cache, const Vec& dlogits,
                               ModelGrads& grads, Mat* dpatches = nullptr);
Vec classify(const ModelState& s, const Image& img);

// masked-autoencoder path; encode keeps only visible patches (class token is
// used internally but not returned), decode fills masked slots with the mask
// token and predicts every patch row
Mat encode(const ModelState& s, const Mat& patches, const MaskPattern& mask);
Mat decode(const ModelState& s, const Mat& encoded_visible, const MaskPattern& mask);
Mat mae_forward(const ModelState& s, const Mat& patches, const MaskPattern& mask, VitCache& cache);
void mae_backward(const ModelState& s, const VitCache& cache, const Mat& dpred, ModelGrads& grads);

Vec softmax(const Vec& logits);

}  // namespace ssfer::nn
