#include "ssfer/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "ssfer/checkpoint.hpp"
#include "ssfer/csv.hpp"
#include "ssfer/plot.hpp"
#include "ssfer/pretrain.hpp"
#include "ssfer/rng.hpp"
#include "ssfer/semisup.hpp"
#include "ssfer/supervised.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ssfer::pipeline {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string rel(const std::string& path, const std::string& base) {
    std::error_code ec;
    const fs::path r = fs::relative(path, base, ec);
    return ec ? path : r.string();
}

}  // namespace

json manifest_to_json(const RunManifest& m) {
    json stages = json::array();
    for (const auto& s : m.stages)
        stages.push_back(json{{"name", s.name},
                              {"checkpoint", s.checkpoint},
                              {"metrics", s.metrics},
                              {"seconds", s.seconds}});
    return json{{"code_version", m.code_version}, {"seed", m.seed},
                {"config", m.config_snapshot},   {"stages", stages},
                {"final_metrics", m.final_metrics}, {"artifacts", m.artifacts},
                {"seconds", m.seconds}};
}

PreparedData prepare_data(const config::TrainConfig& cfg) {
    PreparedData out;
    std::vector<ImageSample> all;
    if (cfg.data.source == "synth") {
        data::SynthSpec spec;
        spec.n_samples = cfg.data.synth.n_samples;
        spec.class_count = cfg.data.synth.class_count;
        spec.image_size = cfg.data.synth.image_size;
        spec.jitter = cfg.data.synth.jitter;
        spec.seed = derive_seed(cfg.seed, seed_ord::data_gen);
        out.detailed = data::synth_generate_detailed(spec);
        all.reserve(out.detailed.size());
        for (const auto& s : out.detailed) all.push_back(s.sample);
    } else {
        all = data::load_manifest(cfg.data.manifest_path);
        check(!all.empty(), "pipeline: manifest '" + cfg.data.manifest_path + "' is empty");
    }

    auto [pool, test] = data::split_holdout(all, cfg.data.test_fraction, cfg.model.class_count,
                                            derive_seed(cfg.seed, seed_ord::test_split));
    out.split =
        data::subsample_labels(pool, cfg.data.budget(), derive_seed(cfg.seed, seed_ord::subsample));
    if (cfg.data.noise_ratio > 0.0)
        out.split = data::inject_label_noise(out.split, cfg.data.noise_ratio,
                                             derive_seed(cfg.seed, seed_ord::noise));
    out.split.test = std::move(test);
    out.split.class_count = cfg.model.class_count;
    out.boxes = cfg.data.make_box_provider();
    return out;
}

void claim_output_dir(const std::string& dir, bool overwrite) {
    check(!dir.empty(), "output directory must not be empty");
    if (fs::exists(dir)) {
        check(fs::is_directory(dir), "output path '" + dir + "' exists and is not a directory");
        if (!fs::is_empty(dir))
            check(overwrite,
                  "output directory '" + dir + "' is not empty (pass --overwrite to reuse it)");
    }
    fs::create_directories(dir);
}

std::vector<std::string> write_eval_report(const evalkit::MetricsReport& r,
                                           const std::string& out_dir) {
    const int classes = static_cast<int>(r.confusion.size());
    std::vector<std::string> paths;

    const std::string metrics_path = (fs::path(out_dir) / "metrics.json").string();
    {
        json j{{"accuracy", r.accuracy},
               {"samples", r.total},
               {"per_class_accuracy", r.per_class_accuracy},
               {"confusion", r.confusion}};
        std::ofstream out(metrics_path);
        check(out.good(), "cannot write " + metrics_path);
        out << j.dump(2) << "\n";
    }
    paths.push_back(metrics_path);

    const std::string csv_path = (fs::path(out_dir) / "confusion.csv").string();
    {
        std::vector<std::string> header = {"true\\pred"};
        for (int c = 0; c < classes; ++c) header.push_back("class_" + std::to_string(c));
        CsvWriter csv(csv_path, header);
        for (int t = 0; t < classes; ++t) {
            std::vector<std::string> row = {"class_" + std::to_string(t)};
            for (int p = 0; p < classes; ++p) row.push_back(std::to_string(r.confusion[t][p]));
            csv.write_row_strings(row);
        }
    }
    paths.push_back(csv_path);

    const std::string png_path = (fs::path(out_dir) / "confusion.png").string();
    {
        std::vector<std::vector<double>> cells(classes, std::vector<double>(classes, 0.0));
        std::vector<std::string> labels;
        for (int t = 0; t < classes; ++t) {
            labels.push_back(std::to_string(t));
            for (int p = 0; p < classes; ++p) cells[t][p] = r.confusion[t][p];
        }
        heatmap_png(png_path, "CONFUSION (ROWS = TRUE)", cells, labels, labels);
    }
    paths.push_back(png_path);
    return paths;
}

std::string find_latest_checkpoint(const std::string& out_dir) {
    for (const char* stem : {"semisup/semisup_final", "supervised/supervised_final",
                             "pretrain/pretrain_final"}) {
        const fs::path p = fs::path(out_dir) / (std::string(stem) + ".json");
        if (fs::exists(p)) return p.string();
    }
    return "";
}

RunManifest run_pipeline(const config::TrainConfig& cfg, const StageFlags& flags,
                         bool overwrite) {
    cfg.validate();
    const auto t_run = std::chrono::steady_clock::now();
    claim_output_dir(cfg.output_dir, overwrite);
    const fs::path out(cfg.output_dir);

    RunManifest man;
    man.code_version = kVersion;
    man.seed = cfg.seed;
    man.config_snapshot = config::config_to_json(cfg);
    config::save_config((out / "config.json").string(), cfg);
    man.artifacts.push_back("config.json");

    const bool any_stage = flags.a || flags.b || flags.c;
    nn::ModelState state;
    bool have_state = false;
    std::vector<Series> loss_series;

    if (any_stage) {
        const PreparedData prep = prepare_data(cfg);
        const auto& split = prep.split;
        log_info("pipeline: " + std::to_string(split.labeled.size()) + " labeled / " +
                 std::to_string(split.unlabeled.size()) + " unlabeled / " +
                 std::to_string(split.test.size()) + " test samples");

        if (flags.a) {
            const auto t0 = std::chrono::steady_clock::now();
            // the reconstruction stage never sees labels; it falls back to the
            // labeled images when the unlabeled split is empty
            std::vector<ImageSample> images =
                split.unlabeled.empty() ? split.labeled : split.unlabeled;
            if (split.unlabeled.empty())
                log_info("pipeline: unlabeled split empty, pretraining on labeled images");
            for (auto& s : images) s.label.reset();
            const auto res = pretrain::run_pretrain(cfg.pretrain, cfg.model, images, cfg.seed,
                                                    (out / "pretrain").string());
            state = res.state;
            have_state = true;
            StageOutcome so;
            so.name = "pretrain";
            so.checkpoint = rel(res.checkpoint_json, cfg.output_dir);
            if (!res.history.empty()) so.metrics["final_loss"] = res.history.back().loss;
            so.seconds = seconds_since(t0);
            man.stages.push_back(so);
            man.artifacts.push_back(so.checkpoint);
            man.artifacts.push_back(rel(res.checkpoint_json.substr(0, res.checkpoint_json.size() - 5) + ".bin",
                                        cfg.output_dir));
            man.artifacts.push_back(rel(res.log_csv, cfg.output_dir));
            Series s{"PRETRAIN", {}, {}};
            for (const auto& e : res.history) {
                s.x.push_back(e.epoch);
                s.y.push_back(e.loss);
            }
            loss_series.push_back(std::move(s));
        }

        if (flags.b) {
            const auto t0 = std::chrono::steady_clock::now();
            if (!have_state) {
                const fs::path ck = out / "pretrain" / "pretrain_final.json";
                if (fs::exists(ck)) {
                    state = nn::load_checkpoint_expect(ck.string(), cfg.model);
                    log_info("pipeline: fine-tuning from " + ck.string());
                } else {
                    state = nn::ModelState::init(cfg.model, cfg.seed);
                    log_info("pipeline: no reconstruction checkpoint found, starting fresh");
                }
                have_state = true;
            }
            const auto res =
                supervised::run_supervised(cfg.supervised, state, split.labeled, split.test,
                                           prep.boxes, cfg.seed, (out / "supervised").string());
            state = res.state;
            StageOutcome so;
            so.name = "supervised";
            so.checkpoint = rel(res.checkpoint_json, cfg.output_dir);
            if (!res.history.empty()) {
                so.metrics["final_loss"] = res.history.back().loss;
                so.metrics["final_eval_acc"] = res.history.back().eval_acc;
            }
            so.metrics["best_eval_acc"] = res.best_acc;
            so.seconds = seconds_since(t0);
            man.stages.push_back(so);
            man.artifacts.push_back(so.checkpoint);
            man.artifacts.push_back(rel(res.best_checkpoint_json, cfg.output_dir));
            man.artifacts.push_back(rel(res.checkpoint_json.substr(0, res.checkpoint_json.size() - 5) + ".bin",
                                        cfg.output_dir));
            man.artifacts.push_back(rel(res.best_checkpoint_json.substr(0, res.best_checkpoint_json.size() - 5) + ".bin",
                                        cfg.output_dir));
            man.artifacts.push_back(rel(res.log_csv, cfg.output_dir));
            Series s{"SUPERVISED", {}, {}};
            for (const auto& e : res.history) {
                s.x.push_back(e.epoch);
                s.y.push_back(e.loss);
            }
            loss_series.push_back(std::move(s));
        }

        if (flags.c) {
            const auto t0 = std::chrono::steady_clock::now();
            if (!have_state) {
                std::string ck;
                for (const char* stem : {"supervised/supervised_final", "pretrain/pretrain_final"}) {
                    const fs::path p = out / (std::string(stem) + ".json");
                    if (fs::exists(p)) {
                        ck = p.string();
                        break;
                    }
                }
                if (!ck.empty()) {
                    state = nn::load_checkpoint_expect(ck, cfg.model);
                    log_info("pipeline: semi-supervised stage starting from " + ck);
                } else {
                    state = nn::ModelState::init(cfg.model, cfg.seed);
                    log_info("pipeline: no earlier checkpoint found, starting fresh");
                }
                have_state = true;
            }
            const auto res = semisup::run_semisup(cfg.semisup, state, split.labeled,
                                                  split.unlabeled, split.test, cfg.seed,
                                                  (out / "semisup").string());
            state = res.final_state;
            StageOutcome so;
            so.name = "semisup";
            so.checkpoint = rel(res.checkpoint_json, cfg.output_dir);
            if (!res.history.empty()) {
                so.metrics["final_loss"] = res.history.back().loss;
                so.metrics["accept_rate"] = res.history.back().accept_rate;
            }
            so.metrics["final_acc"] = res.final_acc;
            so.seconds = seconds_since(t0);
            man.stages.push_back(so);
            man.artifacts.push_back(so.checkpoint);
            man.artifacts.push_back(rel(res.checkpoint_json.substr(0, res.checkpoint_json.size() - 5) + ".bin",
                                        cfg.output_dir));
            man.artifacts.push_back(rel(res.log_csv, cfg.output_dir));
            Series s{"SEMISUP", {}, {}};
            for (const auto& e : res.history) {
                s.x.push_back(e.epoch);
                s.y.push_back(e.loss);
            }
            loss_series.push_back(std::move(s));
        }

        if (!loss_series.empty()) {
            const std::string p = (out / "loss_curves.png").string();
            line_plot(p, "TRAINING LOSS BY STAGE", "EPOCH", "LOSS", loss_series);
            man.artifacts.push_back(rel(p, cfg.output_dir));
        }

        // final evaluation of whatever state the chain produced (the teacher
        // in ema mode, since that is the state stage c hands back)
        const auto report = evalkit::evaluate(state, split.test);
        man.final_metrics["test_accuracy"] = report.accuracy;
        man.final_metrics["test_samples"] = report.total;
        for (const std::string& p : write_eval_report(report, cfg.output_dir))
            man.artifacts.push_back(rel(p, cfg.output_dir));
    }

    man.seconds = seconds_since(t_run);
    {
        const std::string p = (out / "manifest.json").string();
        std::ofstream f(p);
        check(f.good(), "cannot write " + p);
        f << manifest_to_json(man).dump(2) << "\n";
    }
    {
        std::ofstream f((out / "manifests.log").string(), std::ios::app);
        check(f.good(), "cannot append to manifests.log");
        f << manifest_to_json(man).dump() << "\n";
    }
    for (const std::string& a : man.artifacts)
        check(fs::exists(out / a), "pipeline: artifact missing after run: " + a);
    return man;
}

}  // namespace ssfer::pipeline
