#include "ssfer/model.hpp"

#include <algorithm>
#include <cmath>

#include "ssfer/rng.hpp"

namespace ssfer::nn {

void ModelConfig::validate() const {
    check(image_size > 0 && patch_size > 0, "model: image_size and patch_size must be positive");
    check(image_size % patch_size == 0, "model: image_size must be divisible by patch_size");
    check(channels >= 1, "model: channels must be >= 1");
    check(embed_dim >= 1 && depth >= 1 && heads >= 1, "model: bad encoder dimensions");
    check(embed_dim % heads == 0, "model: embed_dim must be divisible by heads");
    check(decoder_embed_dim >= 1 && decoder_depth >= 1 && decoder_heads >= 1,
          "model: bad decoder dimensions");
    check(decoder_embed_dim % decoder_heads == 0,
          "model: decoder_embed_dim must be divisible by decoder_heads");
    check(mlp_ratio > 0.0, "model: mlp_ratio must be positive");
    check(class_count >= 1, "model: class_count must be >= 1");
    check(mask_ratio > 0.0 && mask_ratio < 1.0, "model: mask_ratio must be in (0,1)");
}

ModelConfig ModelConfig::tiny() { return ModelConfig{}; }

ModelConfig ModelConfig::base224() {
    ModelConfig c;
    c.image_size = 224;
    c.patch_size = 16;
    c.embed_dim = 768;
    c.depth = 12;
    c.heads = 12;
    c.decoder_embed_dim = 512;
    c.decoder_depth = 8;
    c.decoder_heads = 16;
    c.class_count = 7;
    return c;
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
    return a.image_size == b.image_size && a.patch_size == b.patch_size &&
           a.channels == b.channels && a.embed_dim == b.embed_dim && a.depth == b.depth &&
           a.heads == b.heads && a.mlp_ratio == b.mlp_ratio &&
           a.decoder_embed_dim == b.decoder_embed_dim && a.decoder_depth == b.decoder_depth &&
           a.decoder_heads == b.decoder_heads && a.class_count == b.class_count &&
           a.mask_ratio == b.mask_ratio;
}

namespace {

void push_block_layout(std::vector<std::pair<std::string, std::pair<int, int>>>& out,
                       const std::string& prefix, int d, int hidden) {
    out.emplace_back(prefix + "ln1.g", std::pair{1, d});
    out.emplace_back(prefix + "ln1.b", std::pair{1, d});
    out.emplace_back(prefix + "attn.qkv.w", std::pair{d, 3 * d});
    out.emplace_back(prefix + "attn.qkv.b", std::pair{1, 3 * d});
    out.emplace_back(prefix + "attn.proj.w", std::pair{d, d});
    out.emplace_back(prefix + "attn.proj.b", std::pair{1, d});
    out.emplace_back(prefix + "ln2.g", std::pair{1, d});
    out.emplace_back(prefix + "ln2.b", std::pair{1, d});
    out.emplace_back(prefix + "mlp.fc1.w", std::pair{d, hidden});
    out.emplace_back(prefix + "mlp.fc1.b", std::pair{1, hidden});
    out.emplace_back(prefix + "mlp.fc2.w", std::pair{hidden, d});
    out.emplace_back(prefix + "mlp.fc2.b", std::pair{1, d});
}

std::vector<std::pair<std::string, std::pair<int, int>>> layout(const ModelConfig& cfg) {
    std::vector<std::pair<std::string, std::pair<int, int>>> out;
    const int d = cfg.embed_dim, dd = cfg.decoder_embed_dim;
    out.emplace_back("patch_embed.w", std::pair{cfg.patch_len(), d});
    out.emplace_back("patch_embed.b", std::pair{1, d});
    out.emplace_back("cls_token", std::pair{1, d});
    out.emplace_back("pos_embed", std::pair{cfg.n_patches() + 1, d});
    for (int i = 0; i < cfg.depth; ++i)
        push_block_layout(out, "enc." + std::to_string(i) + ".", d, cfg.mlp_hidden());
    out.emplace_back("enc.norm.g", std::pair{1, d});
    out.emplace_back("enc.norm.b", std::pair{1, d});
    out.emplace_back("head.w", std::pair{d, cfg.class_count});
    out.emplace_back("head.b", std::pair{1, cfg.class_count});
    out.emplace_back("dec.embed.w", std::pair{d, dd});
    out.emplace_back("dec.embed.b", std::pair{1, dd});
    out.emplace_back("mask_token", std::pair{1, dd});
    out.emplace_back("dec.pos_embed", std::pair{cfg.n_patches(), dd});
    for (int i = 0; i < cfg.decoder_depth; ++i)
        push_block_layout(out, "dec." + std::to_string(i) + ".", dd, cfg.dec_mlp_hidden());
    out.emplace_back("dec.norm.g", std::pair{1, dd});
    out.emplace_back("dec.norm.b", std::pair{1, dd});
    out.emplace_back("dec.pred.w", std::pair{dd, cfg.patch_len()});
    out.emplace_back("dec.pred.b", std::pair{1, cfg.patch_len()});
    return out;
}

bool is_norm_gain(const std::string& name) {
    return name.ends_with("ln1.g") || name.ends_with("ln2.g") || name.ends_with("norm.g");
}

bool is_zero_init(const std::string& name) {
    if (name == "mask_token") return true;
    if (name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0) return true;
    return false;
}

}  // namespace

ModelState make_state_layout(const ModelConfig& cfg) {
    ModelState s;
    s.cfg_ = cfg;
    for (const auto& [name, shape] : layout(cfg)) {
        s.index_[name] = static_cast<int>(s.names_.size());
        s.names_.push_back(name);
        s.params_.emplace_back(Mat::Zero(shape.first, shape.second));
    }
    return s;
}

ModelState ModelState::init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    ModelState s = make_state_layout(cfg);
    Rng rng(seed);
    for (size_t i = 0; i < s.params_.size(); ++i) {
        const std::string& name = s.names_[i];
        Mat& m = s.params_[i];
        if (is_zero_init(name)) continue;
        if (is_norm_gain(name)) {
            m.setOnes();
            continue;
        }
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.truncated_normal(0.0, 0.02);
    }
    return s;
}

ModelState ModelState::zeros_like(const ModelConfig& cfg) {
    cfg.validate();
    return make_state_layout(cfg);
}

int ModelState::index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail("model: unknown tensor '", name, "'");
    return it->second;
}

int64_t ModelState::scalar_count() const {
    int64_t n = 0;
    for (const Mat& m : params_) n += m.size();
    return n;
}

bool ModelState::all_finite() const {
    for (const Mat& m : params_)
        if (!m.allFinite()) return false;
    return true;
}

ModelGrads::ModelGrads(const ModelState& s) {
    g_.reserve(s.tensor_count());
    for (int i = 0; i < s.tensor_count(); ++i)
        g_.emplace_back(Mat::Zero(s.param(i).rows(), s.param(i).cols()));
}

void ModelGrads::zero() {
    for (Mat& m : g_) m.setZero();
}

void ModelGrads::add_scaled(const ModelGrads& other, double scale) {
    check(g_.size() == other.g_.size(), "ModelGrads: layout mismatch");
    for (size_t i = 0; i < g_.size(); ++i) g_[i] += scale * other.g_[i];
}

void ModelGrads::scale(double f) {
    for (Mat& m : g_) m *= f;
}

Mat patchify(const Image& image, int patch_size) {
    check(patch_size > 0 && image.height == image.width && image.height % patch_size == 0,
          "patchify: image must be square and divisible by patch_size");
    const int grid = image.height / patch_size;
    const int plen = patch_size * patch_size * image.channels;
    Mat out(grid * grid, plen);
    for (int py = 0; py < grid; ++py)
        for (int px = 0; px < grid; ++px) {
            const int row = py * grid + px;
            int col = 0;
            for (int dy = 0; dy < patch_size; ++dy)
                for (int dx = 0; dx < patch_size; ++dx)
                    for (int c = 0; c < image.channels; ++c)
                        out(row, col++) =
                            image.at(py * patch_size + dy, px * patch_size + dx, c);
        }
    return out;
}

Image unpatchify(const Mat& patches, int patch_size, int image_size, int channels) {
    const int grid = image_size / patch_size;
    check(grid * patch_size == image_size, "unpatchify: size not divisible");
    check(patches.rows() == grid * grid &&
              patches.cols() == patch_size * patch_size * channels,
          "unpatchify: patch matrix shape mismatch");
    Image img(image_size, image_size, channels);
    for (int py = 0; py < grid; ++py)
        for (int px = 0; px < grid; ++px) {
            const int row = py * grid + px;
            int col = 0;
            for (int dy = 0; dy < patch_size; ++dy)
                for (int dx = 0; dx < patch_size; ++dx)
                    for (int c = 0; c < channels; ++c)
                        img.at(py * patch_size + dy, px * patch_size + dx, c) =
                            static_cast<float>(patches(row, col++));
        }
    return img;
}

MaskPattern sample_mask(int n_patches, double mask_ratio, uint64_t seed) {
    check(n_patches > 0, "sample_mask: need at least one patch");
    check(mask_ratio > 0.0 && mask_ratio < 1.0, "sample_mask: mask_ratio must be in (0,1)");
    const int n_mask = static_cast<int>(std::floor(mask_ratio * n_patches));
    Rng rng(seed);
    MaskPattern p;
    p.n_patches = n_patches;
    p.masked = rng.sample_without_replacement(n_patches, n_mask);
    std::sort(p.masked.begin(), p.masked.end());
    std::vector<char> is_masked(n_patches, 0);
    for (int i : p.masked) is_masked[i] = 1;
    for (int i = 0; i < n_patches; ++i)
        if (!is_masked[i]) p.visible.push_back(i);
    return p;
}

CountResult count_params_flops(const ModelConfig& cfg) {
    cfg.validate();
    const int64_t d = cfg.embed_dim;
    const int64_t h = cfg.mlp_hidden();
    const int64_t np = cfg.n_patches();
    const int64_t t = np + 1;
    const int64_t plen = cfg.patch_len();
    const int64_t c = cfg.class_count;
    const int64_t depth = cfg.depth;

    CountResult r;
    // encoder + head parameters; decoder is dropped after pretraining
    const int64_t block = 2 * d + (d * 3 * d + 3 * d) + (d * d + d) + 2 * d + (d * h + h) +
                          (h * d + d);
    r.params = (plen + 1) * d + d + t * d + depth * block + 2 * d + (d * c + c);
    // multiply-accumulates of the dense projections only: patch embedding,
    // QKV + output projections, the MLP, and the head; the attention
    // matmuls and normalizations are excluded by convention
    r.flops = np * plen * d + depth * (4 * t * d * d + 2 * t * d * h) + d * c;
    return r;
}

Vec softmax(const Vec& logits) {
    const double m = logits.maxCoeff();
    Vec e = (logits.array() - m).exp();
    return e / e.sum();
}

}  // namespace ssfer::nn
