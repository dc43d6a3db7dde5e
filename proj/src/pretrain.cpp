#include "ssfer/pretrain.hpp"

#include <cmath>
#include <filesystem>

#include "ssfer/csv.hpp"
#include "ssfer/checkpoint.hpp"
#include "ssfer/optimizer.hpp"
#include "ssfer/plot.hpp"
#include "ssfer/rng.hpp"
#include "ssfer/threading.hpp"

namespace fs = std::filesystem;

namespace ssfer::pretrain {

namespace {
constexpr double kTargetEps = 1e-6;
}

Mat recon_targets(const Mat& patches, bool normalize) {
    if (!normalize) return patches;
    Mat out(patches.rows(), patches.cols());
    const auto d = static_cast<double>(patches.cols());
    for (Eigen::Index r = 0; r < patches.rows(); ++r) {
        const double mu = patches.row(r).mean();
        const double var = (patches.row(r).array() - mu).square().sum() / d;
        out.row(r) = (patches.row(r).array() - mu) / std::sqrt(var + kTargetEps);
    }
    return out;
}

double recon_loss(const Mat& pred, const Mat& target, const nn::MaskPattern& mask) {
    check(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "recon_loss: shape mismatch");
    check(pred.rows() == mask.n_patches, "recon_loss: mask does not match patch count");
    check(!mask.masked.empty(), "recon_loss: no masked patches");
    double acc = 0.0;
    for (int r : mask.masked) acc += (pred.row(r) - target.row(r)).squaredNorm();
    return acc / (static_cast<double>(mask.masked.size()) * pred.cols());
}

Mat recon_loss_grad(const Mat& pred, const Mat& target, const nn::MaskPattern& mask) {
    check(!mask.masked.empty(), "recon_loss_grad: no masked patches");
    Mat g = Mat::Zero(pred.rows(), pred.cols());
    const double scale = 2.0 / (static_cast<double>(mask.masked.size()) * pred.cols());
    for (int r : mask.masked) g.row(r) = scale * (pred.row(r) - target.row(r));
    return g;
}

PretrainResult run_pretrain(const PretrainConfig& cfg, const nn::ModelConfig& mcfg,
                            const std::vector<ImageSample>& images, uint64_t seed,
                            const std::string& out_dir, const StepObserver& observer) {
    check(cfg.epochs >= 0, "pretrain: negative epoch count");
    check(cfg.batch_size >= 1, "pretrain: batch_size must be >= 1");
    check(cfg.mask_ratio > 0.0 && cfg.mask_ratio < 1.0, "pretrain: mask_ratio must be in (0,1)");
    mcfg.validate();
    check(!images.empty() || cfg.epochs == 0, "pretrain: no images");

    const int n = static_cast<int>(images.size());
    std::vector<Mat> patches(n), targets(n);
    for (int i = 0; i < n; ++i) {
        check(images[i].pixels.height == mcfg.image_size &&
                  images[i].pixels.width == mcfg.image_size &&
                  images[i].pixels.channels == mcfg.channels,
              "pretrain: image '" + images[i].id + "' does not match the model input size");
        patches[i] = nn::patchify(images[i].pixels, mcfg.patch_size);
        targets[i] = recon_targets(patches[i], cfg.normalize_targets);
    }

    PretrainResult res{nn::ModelState::init(mcfg, seed), {}, "", ""};
    nn::AdamW opt(res.state, {cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay});

    const int steps_per_epoch = n > 0 ? (n + cfg.batch_size - 1) / cfg.batch_size : 0;
    const nn::LrSchedule sched{cfg.base_lr, 0.0, 0.0, cfg.warmup_epochs * steps_per_epoch,
                               std::max(1, cfg.epochs * steps_per_epoch)};

    Rng master(derive_seed(seed, 1));
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    nn::ModelGrads grads(res.state);
    int global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        master.shuffle(order);
        double epoch_loss = 0.0;
        double last_lr = 0.0;
        for (int b = 0; b < steps_per_epoch; ++b) {
            const int lo = b * cfg.batch_size;
            const int hi = std::min(n, lo + cfg.batch_size);
            const int bs = hi - lo;

            // per-sample mask seeds drawn up front in batch order
            std::vector<uint64_t> mask_seeds(bs);
            for (int k = 0; k < bs; ++k) mask_seeds[k] = master.next_u64();

            grads.zero();
            std::vector<nn::ModelGrads> chunk_grads(chunk_count(bs));
            std::vector<double> chunk_loss(chunk_count(bs), 0.0);
            std::vector<int> mask_sizes(bs, 0);
            parallel_chunks(bs, [&](int ci, int begin, int end) {
                chunk_grads[ci] = nn::ModelGrads(res.state);
                nn::VitCache cache;
                for (int k = begin; k < end; ++k) {
                    const int idx = order[lo + k];
                    const nn::MaskPattern mask =
                        nn::sample_mask(mcfg.n_patches(), cfg.mask_ratio, mask_seeds[k]);
                    mask_sizes[k] = static_cast<int>(mask.masked.size());
                    const Mat pred = nn::mae_forward(res.state, patches[idx], mask, cache);
                    chunk_loss[ci] += recon_loss(pred, targets[idx], mask);
                    nn::mae_backward(res.state, cache,
                                     recon_loss_grad(pred, targets[idx], mask),
                                     chunk_grads[ci]);
                }
            });
            double batch_loss = 0.0;
            for (size_t ci = 0; ci < chunk_grads.size(); ++ci) {
                grads.add_scaled(chunk_grads[ci], 1.0);
                batch_loss += chunk_loss[ci];
            }
            batch_loss /= bs;
            grads.scale(1.0 / bs);
            if (!std::isfinite(batch_loss))
                fail("pretrain: non-finite loss at epoch ", std::to_string(epoch + 1),
                     " step ", std::to_string(b), " (training diverged)");

            last_lr = sched.at(global_step);
            opt.step(res.state, grads, last_lr);
            if (observer)
                for (int k = 0; k < bs; ++k) observer(epoch, global_step, mask_sizes[k],
                                                      batch_loss);
            ++global_step;
            epoch_loss += batch_loss;
        }
        res.history.push_back({epoch + 1, last_lr, epoch_loss / std::max(1, steps_per_epoch)});
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        res.log_csv = (fs::path(out_dir) / "pretrain_log.csv").string();
        CsvWriter csv(res.log_csv, {"epoch", "lr", "loss"});
        for (const auto& e : res.history)
            csv.write_row({static_cast<double>(e.epoch), e.lr, e.loss});
        nn::CheckpointMeta meta{"pretrain", cfg.epochs, {}};
        if (!res.history.empty()) meta.metrics["final_loss"] = res.history.back().loss;
        res.checkpoint_json =
            nn::save_checkpoint(res.state, (fs::path(out_dir) / "pretrain_final").string(), meta);
    }
    return res;
}

namespace {

// reconstruction in pixel space: decoder output denormalized with the true
// patch statistics, visible patches pasted from the original
Image reconstruct_pixels(const Mat& pred, const Mat& patches, const nn::MaskPattern& mask,
                         bool normalized, const nn::ModelConfig& mcfg) {
    Mat recon = patches;
    for (int r : mask.masked) {
        if (normalized) {
            const double mu = patches.row(r).mean();
            const double var =
                (patches.row(r).array() - mu).square().sum() / patches.cols();
            recon.row(r) = pred.row(r) * std::sqrt(var + kTargetEps);
            recon.row(r).array() += mu;
        } else {
            recon.row(r) = pred.row(r);
        }
    }
    Image img = nn::unpatchify(recon, mcfg.patch_size, mcfg.image_size, mcfg.channels);
    clip01(img);
    return img;
}

Image masked_view(const Mat& patches, const nn::MaskPattern& mask, const nn::ModelConfig& mcfg) {
    Mat shown = patches;
    for (int r : mask.masked) shown.row(r).setConstant(0.5);
    return nn::unpatchify(shown, mcfg.patch_size, mcfg.image_size, mcfg.channels);
}

}  // namespace

std::vector<MaskRatioRow> mask_ratio_study(const std::vector<double>& ratios,
                                           const PretrainConfig& cfg,
                                           const nn::ModelConfig& mcfg,
                                           const std::vector<data::SynthSample>& samples,
                                           uint64_t seed, const std::string& out_dir) {
    check(!ratios.empty(), "mask_ratio_study: no ratios");
    check(samples.size() >= 8, "mask_ratio_study: need at least 8 samples");
    const int n_eval = std::min<int>(32, static_cast<int>(samples.size()) / 4);
    const int n_train = static_cast<int>(samples.size()) - n_eval;

    std::vector<ImageSample> train_images;
    for (int i = 0; i < n_train; ++i) train_images.push_back(samples[i].sample);

    if (!out_dir.empty()) fs::create_directories(out_dir);
    std::vector<MaskRatioRow> rows;
    for (size_t ri = 0; ri < ratios.size(); ++ri) {
        const double ratio = ratios[ri];
        check(ratio > 0.0 && ratio < 1.0, "mask_ratio_study: ratios must be in (0,1)");
        PretrainConfig rcfg = cfg;
        rcfg.mask_ratio = ratio;
        const PretrainResult r = run_pretrain(rcfg, mcfg, train_images, seed, "");

        MaskRatioRow row;
        row.ratio = ratio;
        double expr_num = 0.0;
        int64_t expr_den = 0;
        std::vector<std::vector<Image>> grid(3);
        for (int e = 0; e < n_eval; ++e) {
            const data::SynthSample& s = samples[n_train + e];
            const Mat patches = nn::patchify(s.sample.pixels, mcfg.patch_size);
            const Mat target = recon_targets(patches, cfg.normalize_targets);
            const nn::MaskPattern mask =
                nn::sample_mask(mcfg.n_patches(), ratio, derive_seed(seed, 100 + e));
            nn::VitCache cache;
            const Mat pred = nn::mae_forward(r.state, patches, mask, cache);
            row.masked_mse += recon_loss(pred, target, mask);

            const Image recon =
                reconstruct_pixels(pred, patches, mask, cfg.normalize_targets, mcfg);
            std::vector<char> patch_masked(mcfg.n_patches(), 0);
            for (int m : mask.masked) patch_masked[m] = 1;
            const int grid_w = mcfg.grid();
            for (int y = 0; y < mcfg.image_size; ++y)
                for (int x = 0; x < mcfg.image_size; ++x) {
                    if (!s.expression_mask[static_cast<size_t>(y) * mcfg.image_size + x])
                        continue;
                    const int p = (y / mcfg.patch_size) * grid_w + x / mcfg.patch_size;
                    if (!patch_masked[p]) continue;
                    for (int c = 0; c < mcfg.channels; ++c) {
                        const double d = static_cast<double>(recon.at(y, x, c)) -
                                         s.sample.pixels.at(y, x, c);
                        expr_num += d * d;
                        ++expr_den;
                    }
                }
            if (e < 6 && !out_dir.empty()) {
                grid[0].push_back(s.sample.pixels);
                grid[1].push_back(masked_view(patches, mask, mcfg));
                grid[2].push_back(recon);
            }
        }
        row.masked_mse /= n_eval;
        row.expression_mse = expr_den > 0 ? expr_num / static_cast<double>(expr_den) : 0.0;
        rows.push_back(row);
        if (!out_dir.empty()) {
            char name[64];
            std::snprintf(name, sizeof name, "recon_ratio_%02d.png",
                          static_cast<int>(std::lround(ratio * 100)));
            image_grid_png((fs::path(out_dir) / name).string(), grid,
                           {"ORIGINAL", "MASKED", "RECON"});
        }
    }

    if (!out_dir.empty()) {
        CsvWriter csv((fs::path(out_dir) / "mask_ratio.csv").string(),
                      {"ratio", "masked_mse", "expression_mse"});
        for (const auto& r : rows) csv.write_row({r.ratio, r.masked_mse, r.expression_mse});
        Series s1{"MASKED", {}, {}}, s2{"EXPRESSION", {}, {}};
        for (const auto& r : rows) {
            s1.x.push_back(r.ratio);
            s1.y.push_back(r.masked_mse);
            s2.x.push_back(r.ratio);
            s2.y.push_back(r.expression_mse);
        }
        line_plot((fs::path(out_dir) / "mask_ratio.png").string(), "RECONSTRUCTION VS MASK RATIO",
                  "MASK RATIO", "MSE", {s1, s2});
    }
    return rows;
}

}  // namespace ssfer::pretrain
