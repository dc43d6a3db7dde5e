#include <cmath>
#include <numbers>

#include "ssfer/model.hpp"

namespace ssfer::nn {

namespace {

constexpr double kLnEps = 1e-6;

Mat layer_norm_forward(const Mat& x, const Mat& g, const Mat& b, LayerNormCache& c) {
    const Eigen::Index T = x.rows(), d = x.cols();
    c.xhat.resize(T, d);
    c.rstd.resize(T);
    Mat out(T, d);
    for (Eigen::Index t = 0; t < T; ++t) {
        const double mu = x.row(t).mean();
        const double var = (x.row(t).array() - mu).square().sum() / static_cast<double>(d);
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        c.rstd(t) = rstd;
        c.xhat.row(t) = (x.row(t).array() - mu) * rstd;
        out.row(t) = c.xhat.row(t).cwiseProduct(g.row(0)) + b.row(0);
    }
    return out;
}

Mat layer_norm_backward(const Mat& dy, const Mat& g, const LayerNormCache& c, Mat& dg, Mat& db) {
    const Eigen::Index T = dy.rows(), d = dy.cols();
    dg.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    db.row(0) += dy.colwise().sum();
    Mat dx(T, d);
    for (Eigen::Index t = 0; t < T; ++t) {
        const auto dxhat = dy.row(t).array() * g.row(0).array();
        const double m1 = dxhat.mean();
        const double m2 = (dxhat * c.xhat.row(t).array()).mean();
        dx.row(t) = ((dxhat - m1 - c.xhat.row(t).array() * m2) * c.rstd(t)).matrix();
    }
    return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

struct BlockIdx {
    int ln1g, ln1b, qkvw, qkvb, projw, projb, ln2g, ln2b, fc1w, fc1b, fc2w, fc2b;
};

BlockIdx block_idx(const ModelState& s, const std::string& prefix) {
    return BlockIdx{s.index(prefix + "ln1.g"),      s.index(prefix + "ln1.b"),
                    s.index(prefix + "attn.qkv.w"), s.index(prefix + "attn.qkv.b"),
                    s.index(prefix + "attn.proj.w"), s.index(prefix + "attn.proj.b"),
                    s.index(prefix + "ln2.g"),      s.index(prefix + "ln2.b"),
                    s.index(prefix + "mlp.fc1.w"),  s.index(prefix + "mlp.fc1.b"),
                    s.index(prefix + "mlp.fc2.w"),  s.index(prefix + "mlp.fc2.b")};
}

Mat attention_forward(const ModelState& s, const BlockIdx& bi, int heads, const Mat& x,
                      BlockCache& c) {
    const Eigen::Index T = x.rows(), d = x.cols();
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    c.qkv.noalias() = x * s.param(bi.qkvw);
    c.qkv.rowwise() += s.param(bi.qkvb).row(0);
    c.probs.resize(heads);
    c.attn_concat.resize(T, d);
    for (int h = 0; h < heads; ++h) {
        const auto Q = c.qkv.middleCols(h * dh, dh);
        const auto K = c.qkv.middleCols(d + h * dh, dh);
        const auto V = c.qkv.middleCols(2 * d + h * dh, dh);
        Mat S(T, T);
        S.noalias() = Q * K.transpose();
        S *= scale;
        for (Eigen::Index t = 0; t < T; ++t) {
            const double m = S.row(t).maxCoeff();
            S.row(t) = (S.row(t).array() - m).exp();
            S.row(t) /= S.row(t).sum();
        }
        c.probs[h] = std::move(S);
        c.attn_concat.middleCols(h * dh, dh).noalias() = c.probs[h] * V;
    }
    Mat out(T, d);
    out.noalias() = c.attn_concat * s.param(bi.projw);
    out.rowwise() += s.param(bi.projb).row(0);
    return out;
}

Mat attention_backward(const ModelState& s, const BlockIdx& bi, int heads, const Mat& dy,
                       const BlockCache& c, ModelGrads& g) {
    const Eigen::Index T = dy.rows(), d = dy.cols();
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    g[bi.projw].noalias() += c.attn_concat.transpose() * dy;
    g[bi.projb].row(0) += dy.colwise().sum();
    Mat dconcat(T, d);
    dconcat.noalias() = dy * s.param(bi.projw).transpose();

    Mat dqkv = Mat::Zero(T, 3 * d);
    for (int h = 0; h < heads; ++h) {
        const auto dO = dconcat.middleCols(h * dh, dh);
        const Mat& P = c.probs[h];
        const auto Q = c.qkv.middleCols(h * dh, dh);
        const auto K = c.qkv.middleCols(d + h * dh, dh);
        const auto V = c.qkv.middleCols(2 * d + h * dh, dh);

        dqkv.middleCols(2 * d + h * dh, dh).noalias() = P.transpose() * dO;
        Mat dP(T, T);
        dP.noalias() = dO * V.transpose();
        const Vec rowdot = (dP.array() * P.array()).rowwise().sum();
        Mat dS = (P.array() * (dP.array().colwise() - rowdot.array())).matrix();
        dS *= scale;
        dqkv.middleCols(h * dh, dh).noalias() = dS * K;
        dqkv.middleCols(d + h * dh, dh).noalias() = dS.transpose() * Q;
    }
    g[bi.qkvw].noalias() += c.ln1_out.transpose() * dqkv;
    g[bi.qkvb].row(0) += dqkv.colwise().sum();
    Mat dx(T, d);
    dx.noalias() = dqkv * s.param(bi.qkvw).transpose();
    return dx;
}

Mat block_forward(const ModelState& s, const std::string& prefix, int heads, const Mat& x,
                  BlockCache& c) {
    const BlockIdx bi = block_idx(s, prefix);
    c.x_in = x;
    c.ln1_out = layer_norm_forward(x, s.param(bi.ln1g), s.param(bi.ln1b), c.ln1);
    c.x_mid = x + attention_forward(s, bi, heads, c.ln1_out, c);
    c.ln2_out = layer_norm_forward(c.x_mid, s.param(bi.ln2g), s.param(bi.ln2b), c.ln2);
    c.fc1_out.noalias() = c.ln2_out * s.param(bi.fc1w);
    c.fc1_out.rowwise() += s.param(bi.fc1b).row(0);
    c.act_out = c.fc1_out.unaryExpr([](double v) { return gelu(v); });
    Mat y(x.rows(), x.cols());
    y.noalias() = c.act_out * s.param(bi.fc2w);
    y.rowwise() += s.param(bi.fc2b).row(0);
    return c.x_mid + y;
}

Mat block_backward(const ModelState& s, const std::string& prefix, int heads,
                   const BlockCache& c, const Mat& dy, ModelGrads& g) {
    const BlockIdx bi = block_idx(s, prefix);

    g[bi.fc2w].noalias() += c.act_out.transpose() * dy;
    g[bi.fc2b].row(0) += dy.colwise().sum();
    Mat dact(dy.rows(), c.act_out.cols());
    dact.noalias() = dy * s.param(bi.fc2w).transpose();
    const Mat dfc1 =
        (dact.array() * c.fc1_out.unaryExpr([](double v) { return gelu_grad(v); }).array())
            .matrix();
    g[bi.fc1w].noalias() += c.ln2_out.transpose() * dfc1;
    g[bi.fc1b].row(0) += dfc1.colwise().sum();
    Mat dln2(dy.rows(), dy.cols());
    dln2.noalias() = dfc1 * s.param(bi.fc1w).transpose();

    Mat dxmid = layer_norm_backward(dln2, s.param(bi.ln2g), c.ln2, g[bi.ln2g], g[bi.ln2b]);
    dxmid += dy;  // residual around the mlp

    const Mat dln1 = attention_backward(s, bi, heads, dxmid, c, g);
    Mat dx = layer_norm_backward(dln1, s.param(bi.ln1g), c.ln1, g[bi.ln1g], g[bi.ln1b]);
    dx += dxmid;  // residual around attention
    return dx;
}

Mat gather_rows(const Mat& m, const std::vector<int>& idx) {
    Mat out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
    return out;
}

void check_patches(const ModelConfig& cfg, const Mat& patches) {
    check(patches.rows() == cfg.n_patches() && patches.cols() == cfg.patch_len(),
          "model: patch matrix does not match the configuration");
}

}  // namespace

Vec classify_forward(const ModelState& s, const Mat& patches, VitCache& cache) {
    const ModelConfig& cfg = s.config();
    check_patches(cfg, patches);
    const int np = cfg.n_patches();
    const int d = cfg.embed_dim;

    cache.patches = patches;
    cache.vis_idx.clear();
    const Mat& pos = s.param("pos_embed");
    cache.enc_in.resize(np + 1, d);
    cache.enc_in.row(0) = s.param("cls_token").row(0) + pos.row(0);
    Mat emb(np, d);
    emb.noalias() = patches * s.param("patch_embed.w");
    emb.rowwise() += s.param("patch_embed.b").row(0);
    cache.enc_in.middleRows(1, np) = emb + pos.middleRows(1, np);

    cache.enc_blocks.resize(cfg.depth);
    Mat x = cache.enc_in;
    for (int i = 0; i < cfg.depth; ++i)
        x = block_forward(s, "enc." + std::to_string(i) + ".", cfg.heads, x,
                          cache.enc_blocks[i]);
    cache.enc_out = layer_norm_forward(x, s.param("enc.norm.g"), s.param("enc.norm.b"),
                                       cache.enc_norm);
    Vec logits = (cache.enc_out.row(0) * s.param("head.w")).transpose();
    logits += s.param("head.b").row(0).transpose();
    return logits;
}

Vec classify_forward(const ModelState& s, const Image& img, VitCache& cache) {
    const ModelConfig& cfg = s.config();
    check(img.height == cfg.image_size && img.width == cfg.image_size &&
              img.channels == cfg.channels,
          "classify: image shape does not match the model");
    return classify_forward(s, patchify(img, cfg.patch_size), cache);
}

void classify_backward_patches(const ModelState& s, const VitCache& cache, const Vec& dlogits,
                               ModelGrads& grads, Mat* dpatches) {
    const ModelConfig& cfg = s.config();
    const int np = cfg.n_patches();

    grads[s.index("head.w")].noalias() += cache.enc_out.row(0).transpose() * dlogits.transpose();
    grads[s.index("head.b")].row(0) += dlogits.transpose();
    Mat denc = Mat::Zero(np + 1, cfg.embed_dim);
    denc.row(0).noalias() = (s.param("head.w") * dlogits).transpose();

    Mat dx = layer_norm_backward(denc, s.param("enc.norm.g"), cache.enc_norm,
                                 grads[s.index("enc.norm.g")], grads[s.index("enc.norm.b")]);
    for (int i = cfg.depth - 1; i >= 0; --i)
        dx = block_backward(s, "enc." + std::to_string(i) + ".", cfg.heads,
                            cache.enc_blocks[i], dx, grads);

    grads[s.index("cls_token")].row(0) += dx.row(0);
    grads[s.index("pos_embed")] += dx;
    const auto demb = dx.middleRows(1, np);
    grads[s.index("patch_embed.w")].noalias() += cache.patches.transpose() * demb;
    grads[s.index("patch_embed.b")].row(0) += demb.colwise().sum();
    if (dpatches) {
        dpatches->resize(np, cfg.patch_len());
        dpatches->noalias() = demb * s.param("patch_embed.w").transpose();
    }
}

void classify_backward(const ModelState& s, const VitCache& cache, const Vec& dlogits,
                       ModelGrads& grads, Image* dpixels) {
    if (!dpixels) {
        classify_backward_patches(s, cache, dlogits, grads, nullptr);
        return;
    }
    Mat dpatches;
    classify_backward_patches(s, cache, dlogits, grads, &dpatches);
    const ModelConfig& cfg = s.config();
    *dpixels = unpatchify(dpatches, cfg.patch_size, cfg.image_size, cfg.channels);
}

Vec classify(const ModelState& s, const Image& img) {
    VitCache cache;
    return classify_forward(s, img, cache);
}

Mat mae_forward(const ModelState& s, const Mat& patches, const MaskPattern& mask,
                VitCache& cache) {
    const ModelConfig& cfg = s.config();
    check_patches(cfg, patches);
    check(mask.n_patches == cfg.n_patches(), "mae: mask pattern does not match the model");
    check(!mask.visible.empty(), "mae: no visible patches");
    const int nv = static_cast<int>(mask.visible.size());
    const int d = cfg.embed_dim, dd = cfg.decoder_embed_dim;
    const int np = cfg.n_patches();

    cache.vis_idx = mask.visible;
    cache.patches = gather_rows(patches, mask.visible);
    const Mat& pos = s.param("pos_embed");
    cache.enc_in.resize(nv + 1, d);
    cache.enc_in.row(0) = s.param("cls_token").row(0) + pos.row(0);
    Mat emb(nv, d);
    emb.noalias() = cache.patches * s.param("patch_embed.w");
    emb.rowwise() += s.param("patch_embed.b").row(0);
    for (int k = 0; k < nv; ++k)
        cache.enc_in.row(1 + k) = emb.row(k) + pos.row(1 + mask.visible[k]);

    cache.enc_blocks.resize(cfg.depth);
    Mat x = cache.enc_in;
    for (int i = 0; i < cfg.depth; ++i)
        x = block_forward(s, "enc." + std::to_string(i) + ".", cfg.heads, x,
                          cache.enc_blocks[i]);
    cache.enc_out = layer_norm_forward(x, s.param("enc.norm.g"), s.param("enc.norm.b"),
                                       cache.enc_norm);

    // decoder works on patch tokens only; masked slots get the mask token
    cache.dec_in.resize(np, dd);
    Mat dec_emb(nv, dd);
    dec_emb.noalias() = cache.enc_out.middleRows(1, nv) * s.param("dec.embed.w");
    dec_emb.rowwise() += s.param("dec.embed.b").row(0);
    const Mat& mtok = s.param("mask_token");
    for (int i : mask.masked) cache.dec_in.row(i) = mtok.row(0);
    for (int k = 0; k < nv; ++k) cache.dec_in.row(mask.visible[k]) = dec_emb.row(k);
    cache.dec_in += s.param("dec.pos_embed");

    cache.dec_blocks.resize(cfg.decoder_depth);
    Mat y = cache.dec_in;
    for (int i = 0; i < cfg.decoder_depth; ++i)
        y = block_forward(s, "dec." + std::to_string(i) + ".", cfg.decoder_heads, y,
                          cache.dec_blocks[i]);
    cache.dec_out = layer_norm_forward(y, s.param("dec.norm.g"), s.param("dec.norm.b"),
                                       cache.dec_norm);
    Mat pred(np, cfg.patch_len());
    pred.noalias() = cache.dec_out * s.param("dec.pred.w");
    pred.rowwise() += s.param("dec.pred.b").row(0);
    return pred;
}

void mae_backward(const ModelState& s, const VitCache& cache, const Mat& dpred,
                  ModelGrads& grads) {
    const ModelConfig& cfg = s.config();
    const int nv = static_cast<int>(cache.vis_idx.size());
    const int np = cfg.n_patches();

    grads[s.index("dec.pred.w")].noalias() += cache.dec_out.transpose() * dpred;
    grads[s.index("dec.pred.b")].row(0) += dpred.colwise().sum();
    Mat ddec(np, cfg.decoder_embed_dim);
    ddec.noalias() = dpred * s.param("dec.pred.w").transpose();

    Mat dy = layer_norm_backward(ddec, s.param("dec.norm.g"), cache.dec_norm,
                                 grads[s.index("dec.norm.g")], grads[s.index("dec.norm.b")]);
    for (int i = cfg.decoder_depth - 1; i >= 0; --i)
        dy = block_backward(s, "dec." + std::to_string(i) + ".", cfg.decoder_heads,
                            cache.dec_blocks[i], dy, grads);

    grads[s.index("dec.pos_embed")] += dy;
    Mat& dmask = grads[s.index("mask_token")];
    std::vector<char> is_vis(np, 0);
    for (int v : cache.vis_idx) is_vis[v] = 1;
    for (int i = 0; i < np; ++i)
        if (!is_vis[i]) dmask.row(0) += dy.row(i);

    Mat ddec_emb(nv, cfg.decoder_embed_dim);
    for (int k = 0; k < nv; ++k) ddec_emb.row(k) = dy.row(cache.vis_idx[k]);
    grads[s.index("dec.embed.w")].noalias() +=
        cache.enc_out.middleRows(1, nv).transpose() * ddec_emb;
    grads[s.index("dec.embed.b")].row(0) += ddec_emb.colwise().sum();

    Mat denc = Mat::Zero(nv + 1, cfg.embed_dim);
    denc.middleRows(1, nv).noalias() = ddec_emb * s.param("dec.embed.w").transpose();
    Mat dx = layer_norm_backward(denc, s.param("enc.norm.g"), cache.enc_norm,
                                 grads[s.index("enc.norm.g")], grads[s.index("enc.norm.b")]);
    for (int i = cfg.depth - 1; i >= 0; --i)
        dx = block_backward(s, "enc." + std::to_string(i) + ".", cfg.heads,
                            cache.enc_blocks[i], dx, grads);

    grads[s.index("cls_token")].row(0) += dx.row(0);
    Mat& dpos = grads[s.index("pos_embed")];
    dpos.row(0) += dx.row(0);
    for (int k = 0; k < nv; ++k) dpos.row(1 + cache.vis_idx[k]) += dx.row(1 + k);
    grads[s.index("patch_embed.w")].noalias() +=
        cache.patches.transpose() * dx.middleRows(1, nv);
    grads[s.index("patch_embed.b")].row(0) += dx.middleRows(1, nv).colwise().sum();
}

Mat encode(const ModelState& s, const Mat& patches, const MaskPattern& mask) {
    const ModelConfig& cfg = s.config();
    check_patches(cfg, patches);
    check(mask.n_patches == cfg.n_patches(), "encode: mask pattern does not match the model");
    check(!mask.visible.empty(), "encode: no visible patches");
    const int nv = static_cast<int>(mask.visible.size());

    VitCache cache;
    cache.vis_idx = mask.visible;
    cache.patches = gather_rows(patches, mask.visible);
    const Mat& pos = s.param("pos_embed");
    cache.enc_in.resize(nv + 1, cfg.embed_dim);
    cache.enc_in.row(0) = s.param("cls_token").row(0) + pos.row(0);
    Mat emb(nv, cfg.embed_dim);
    emb.noalias() = cache.patches * s.param("patch_embed.w");
    emb.rowwise() += s.param("patch_embed.b").row(0);
    for (int k = 0; k < nv; ++k)
        cache.enc_in.row(1 + k) = emb.row(k) + pos.row(1 + mask.visible[k]);

    cache.enc_blocks.resize(cfg.depth);
    Mat x = cache.enc_in;
    for (int i = 0; i < cfg.depth; ++i)
        x = block_forward(s, "enc." + std::to_string(i) + ".", cfg.heads, x,
                          cache.enc_blocks[i]);
    const Mat out = layer_norm_forward(x, s.param("enc.norm.g"), s.param("enc.norm.b"),
                                       cache.enc_norm);
    return out.middleRows(1, nv);
}

Mat decode(const ModelState& s, const Mat& encoded_visible, const MaskPattern& mask) {
    const ModelConfig& cfg = s.config();
    const int nv = static_cast<int>(mask.visible.size());
    check(encoded_visible.rows() == nv && encoded_visible.cols() == cfg.embed_dim,
          "decode: encoded token matrix shape mismatch");
    const int np = cfg.n_patches();
    check(mask.n_patches == np, "decode: mask pattern does not match the model");

    Mat dec_in(np, cfg.decoder_embed_dim);
    Mat dec_emb(nv, cfg.decoder_embed_dim);
    dec_emb.noalias() = encoded_visible * s.param("dec.embed.w");
    dec_emb.rowwise() += s.param("dec.embed.b").row(0);
    for (int i : mask.masked) dec_in.row(i) = s.param("mask_token").row(0);
    for (int k = 0; k < nv; ++k) dec_in.row(mask.visible[k]) = dec_emb.row(k);
    dec_in += s.param("dec.pos_embed");

    Mat y = dec_in;
    BlockCache scratch;
    for (int i = 0; i < cfg.decoder_depth; ++i)
        y = block_forward(s, "dec." + std::to_string(i) + ".", cfg.decoder_heads, y, scratch);
    LayerNormCache ln;
    y = layer_norm_forward(y, s.param("dec.norm.g"), s.param("dec.norm.b"), ln);
    Mat pred(np, cfg.patch_len());
    pred.noalias() = y * s.param("dec.pred.w");
    pred.rowwise() += s.param("dec.pred.b").row(0);
    return pred;
}

}  // namespace ssfer::nn
