#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "ssfer/checkpoint.hpp"
#include "ssfer/config.hpp"
#include "ssfer/csv.hpp"
#include "ssfer/evalkit.hpp"
#include "ssfer/experiments.hpp"
#include "ssfer/pipeline.hpp"
#include "ssfer/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ssfer;

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::string out_dir;
    bool overwrite = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "run seed (overrides the config)");
    cmd->add_option("--out", o.out_dir, "output directory (overrides the config)");
    cmd->add_flag("--overwrite", o.overwrite, "allow reusing a non-empty output directory");
}

config::TrainConfig resolve_config(const CommonOpts& o) {
    json j;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        check(in.good(), "cannot open config '" + o.config_path + "'");
        try {
            in >> j;
        } catch (const json::exception& e) {
            fail("config '", o.config_path, "' is not valid JSON (", e.what(), ")");
        }
    } else {
        j = config::config_to_json(config::default_config());
    }
    if (o.seed.has_value()) j["seed"] = *o.seed;
    if (!o.out_dir.empty()) j["output_dir"] = o.out_dir;
    return config::config_from_json(j);
}

int run_stages(const CommonOpts& o, const pipeline::StageFlags& flags) {
    const auto cfg = resolve_config(o);
    const auto man = pipeline::run_pipeline(cfg, flags, o.overwrite);
    if (man.final_metrics.count("test_accuracy"))
        std::cout << "test accuracy " << fmt_num(man.final_metrics.at("test_accuracy")) << "\n";
    std::cout << "run complete, manifest at " << (fs::path(cfg.output_dir) / "manifest.json").string()
              << "\n";
    return 0;
}

int run_eval(const CommonOpts& o, const std::string& checkpoint) {
    const auto cfg = resolve_config(o);
    std::string ck = checkpoint;
    if (ck.empty()) {
        check(!cfg.output_dir.empty(), "eval: pass --out (run directory) or --checkpoint");
        ck = pipeline::find_latest_checkpoint(cfg.output_dir);
        check(!ck.empty(), "eval: no checkpoint found under '" + cfg.output_dir + "'");
    }
    const auto state = nn::load_checkpoint_expect(ck, cfg.model);
    const auto prep = pipeline::prepare_data(cfg);
    const auto report = evalkit::evaluate(state, prep.split.test);
    std::cout << "checkpoint " << ck << "\n";
    std::cout << "accuracy " << fmt_num(report.accuracy) << " over " << report.total
              << " test samples\n";
    if (!cfg.output_dir.empty()) {
        fs::create_directories(cfg.output_dir);
        pipeline::write_eval_report(report, cfg.output_dir);
    }
    return 0;
}

int run_synth_cmd(const std::string& out_dir, int count, int classes, int size, double jitter,
                  uint64_t seed, bool overwrite) {
    pipeline::claim_output_dir(out_dir, overwrite);
    data::SynthSpec spec;
    spec.n_samples = count;
    spec.class_count = classes;
    spec.image_size = size;
    spec.jitter = jitter;
    spec.seed = seed;
    const auto samples = data::synth_generate(spec);
    const std::string manifest = (fs::path(out_dir) / "manifest.json").string();
    data::save_manifest(manifest, samples);
    data::save_box_sidecar((fs::path(out_dir) / "boxes.txt").string(), samples);
    std::cout << "wrote " << samples.size() << " images, manifest at " << manifest << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"three-stage facial expression recognition trainer"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    CommonOpts po;
    auto* cmd_pipeline = app.add_subcommand("pipeline", "run stages a->b->c");
    add_common(cmd_pipeline, po);
    std::vector<std::string> skip;
    cmd_pipeline->add_option("--skip-stage", skip, "stage to skip (a, b or c; repeatable)")
        ->check(CLI::IsMember({"a", "b", "c"}));

    CommonOpts ao;
    auto* cmd_pre = app.add_subcommand("pretrain", "stage a only: masked reconstruction");
    add_common(cmd_pre, ao);

    CommonOpts bo;
    auto* cmd_fine = app.add_subcommand("finetune", "stage b only: supervised fine-tuning");
    add_common(cmd_fine, bo);

    CommonOpts co;
    auto* cmd_semi = app.add_subcommand("semisup", "stage c only: semi-supervised fine-tuning");
    add_common(cmd_semi, co);

    CommonOpts eo;
    std::string eval_checkpoint;
    auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    add_common(cmd_eval, eo);
    cmd_eval->add_option("--checkpoint", eval_checkpoint, "checkpoint manifest (.json)")
        ->check(CLI::ExistingFile);

    CommonOpts xo;
    std::string exp_name;
    auto* cmd_exp = app.add_subcommand("experiment", "run a named experiment");
    add_common(cmd_exp, xo);
    cmd_exp->add_option("name", exp_name, "experiment name")->required();

    CommonOpts ho;
    auto* cmd_hpo = app.add_subcommand("hpo", "learning-rate search (same as 'experiment hpo')");
    add_common(cmd_hpo, ho);

    std::string synth_out;
    int synth_count = 100, synth_classes = 3, synth_size = 32;
    double synth_jitter = 0.3;
    uint64_t synth_seed = 0;
    bool synth_overwrite = false;
    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic face dataset");
    cmd_synth->add_option("--out", synth_out, "output directory")->required();
    cmd_synth->add_option("--count", synth_count, "number of images");
    cmd_synth->add_option("--classes", synth_classes, "number of expression classes");
    cmd_synth->add_option("--size", synth_size, "image side length");
    cmd_synth->add_option("--jitter", synth_jitter, "geometry jitter in [0,1]");
    cmd_synth->add_option("--seed", synth_seed, "generator seed");
    cmd_synth->add_flag("--overwrite", synth_overwrite, "allow a non-empty output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_pipeline->parsed()) {
            pipeline::StageFlags flags;
            for (const auto& s : skip) {
                if (s == "a") flags.a = false;
                else if (s == "b") flags.b = false;
                else flags.c = false;
            }
            return run_stages(po, flags);
        }
        if (cmd_pre->parsed()) return run_stages(ao, {true, false, false});
        if (cmd_fine->parsed()) return run_stages(bo, {false, true, false});
        if (cmd_semi->parsed()) return run_stages(co, {false, false, true});
        if (cmd_eval->parsed()) return run_eval(eo, eval_checkpoint);
        if (cmd_exp->parsed()) {
            experiments::run_experiment(exp_name, resolve_config(xo), xo.overwrite);
            return 0;
        }
        if (cmd_hpo->parsed()) {
            experiments::run_experiment("hpo", resolve_config(ho), ho.overwrite);
            return 0;
        }
        if (cmd_synth->parsed())
            return run_synth_cmd(synth_out, synth_count, synth_classes, synth_size, synth_jitter,
                                 synth_seed, synth_overwrite);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
