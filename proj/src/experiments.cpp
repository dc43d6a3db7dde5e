#include "ssfer/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "ssfer/csv.hpp"
#include "ssfer/pipeline.hpp"
#include "ssfer/plot.hpp"
#include "ssfer/rng.hpp"
#include "ssfer/semisup.hpp"
#include "ssfer/supervised.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ssfer::experiments {

namespace {

std::vector<ImageSample> all_samples(const config::TrainConfig& cfg) {
    if (cfg.data.source == "synth") {
        data::SynthSpec spec;
        spec.n_samples = cfg.data.synth.n_samples;
        spec.class_count = cfg.data.synth.class_count;
        spec.image_size = cfg.data.synth.image_size;
        spec.jitter = cfg.data.synth.jitter;
        spec.seed = derive_seed(cfg.seed, pipeline::seed_ord::data_gen);
        return data::synth_generate(spec);
    }
    auto all = data::load_manifest(cfg.data.manifest_path);
    check(!all.empty(), "experiment: manifest '" + cfg.data.manifest_path + "' is empty");
    return all;
}

std::vector<ImageSample> strip_labels(std::vector<ImageSample> v) {
    for (auto& s : v) s.label.reset();
    return v;
}

// stage a -> b -> c on a prepared split, nothing written, final state out
nn::ModelState train_chain(const config::TrainConfig& cfg, const data::DatasetSplit& split,
                           const data::BoxProvider& boxes, uint64_t seed, bool with_semisup) {
    const std::vector<ImageSample>& pre_src =
        split.unlabeled.empty() ? split.labeled : split.unlabeled;
    auto a = pretrain::run_pretrain(cfg.pretrain, cfg.model, strip_labels(pre_src), seed, "");
    auto b = supervised::run_supervised(cfg.supervised, a.state, split.labeled, {}, boxes, seed, "");
    if (!with_semisup) return b.state;
    auto c = semisup::run_semisup(cfg.semisup, b.state, split.labeled, split.unlabeled, {}, seed, "");
    return c.final_state;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    check(out.good(), "cannot write " + path);
    out << j.dump(2) << "\n";
}

std::string pct_label(double ratio) {
    const double pct = ratio * 100.0;
    const long long r = std::llround(pct);
    if (std::abs(pct - static_cast<double>(r)) < 1e-9) return std::to_string(r);
    return fmt_num(pct);
}

}  // namespace

std::vector<std::string> experiment_names() {
    return {"kfold", "noise", "attack", "maskratio", "hpo", "semicompare", "components"};
}

KfoldReport run_kfold(const config::TrainConfig& cfg) {
    const auto all = all_samples(cfg);
    const int k = cfg.experiments.kfold.folds;
    const uint64_t kseed = derive_seed(cfg.seed, pipeline::seed_ord::kfold);
    const auto folds = data::kfold_split(all, k, kseed);
    const auto boxes = cfg.data.make_box_provider();

    KfoldReport rep;
    for (int f = 0; f < k; ++f) {
        const uint64_t fold_seed = derive_seed(kseed, static_cast<uint64_t>(f));
        auto split = data::subsample_labels(folds[f].train, cfg.data.budget(),
                                            derive_seed(fold_seed, pipeline::seed_ord::subsample));
        split.class_count = cfg.model.class_count;
        if (cfg.data.noise_ratio > 0.0)
            split = data::inject_label_noise(split, cfg.data.noise_ratio,
                                             derive_seed(fold_seed, pipeline::seed_ord::noise));
        const auto state = train_chain(cfg, split, boxes, fold_seed, true);
        const double acc = evalkit::evaluate(state, folds[f].validation).accuracy;
        rep.fold_acc.push_back(acc);
        log_info("kfold: fold " + std::to_string(f + 1) + "/" + std::to_string(k) +
                 " accuracy " + fmt_num(acc));
    }
    rep.average = std::accumulate(rep.fold_acc.begin(), rep.fold_acc.end(), 0.0) / k;

    if (!cfg.output_dir.empty()) {
        const fs::path out(cfg.output_dir);
        fs::create_directories(out);
        std::vector<std::string> header;
        for (int f = 1; f <= k; ++f) header.push_back("fold_" + std::to_string(f));
        header.push_back("average");
        CsvWriter csv((out / "kfold.csv").string(), header);
        std::vector<double> row = rep.fold_acc;
        row.push_back(rep.average);
        csv.write_row(row);
        write_json((out / "kfold.json").string(),
                   json{{"folds", rep.fold_acc}, {"average", rep.average}});
        std::vector<std::string> labels;
        for (int f = 1; f <= k; ++f) labels.push_back("FOLD " + std::to_string(f));
        labels.push_back("AVG");
        bar_plot((out / "kfold.png").string(), "K-FOLD ACCURACY", labels, row);
    }
    return rep;
}

NoiseReport run_noise(const config::TrainConfig& cfg) {
    const auto all = all_samples(cfg);
    auto [pool, test] = data::split_holdout(all, cfg.data.test_fraction, cfg.model.class_count,
                                            derive_seed(cfg.seed, pipeline::seed_ord::test_split));
    const auto boxes = cfg.data.make_box_provider();

    // one reconstruction pass over the whole pool, shared by every cell
    const auto pre =
        pretrain::run_pretrain(cfg.pretrain, cfg.model, strip_labels(pool), cfg.seed, "");

    std::vector<double> budgets = cfg.experiments.noise.budgets;
    if (budgets.empty()) budgets.push_back(cfg.data.budget_value);

    NoiseReport rep;
    rep.ratios = cfg.experiments.noise.ratios;
    for (double bv : budgets) {
        data::LabelBudget budget = cfg.data.budget();
        budget.value = bv;
        NoiseRow row;
        row.budget = bv;
        for (double ratio : rep.ratios) {
            auto split = data::subsample_labels(pool, budget,
                                                derive_seed(cfg.seed, pipeline::seed_ord::subsample));
            split.class_count = cfg.model.class_count;
            if (ratio > 0.0)
                split = data::inject_label_noise(split, ratio,
                                                 derive_seed(cfg.seed, pipeline::seed_ord::noise));
            const auto res = supervised::run_supervised(cfg.supervised, pre.state, split.labeled,
                                                        test, boxes, cfg.seed, "");
            row.acc.push_back(res.best_acc);
            log_info("noise: budget " + fmt_num(bv) + " ratio " + fmt_num(ratio) +
                     " accuracy " + fmt_num(res.best_acc));
        }
        row.decline = row.acc.front() - row.acc.back();
        rep.rows.push_back(std::move(row));
    }

    if (!cfg.output_dir.empty()) {
        const fs::path out(cfg.output_dir);
        fs::create_directories(out);
        std::vector<std::string> header = {"budget"};
        for (double r : rep.ratios) header.push_back("noise_" + pct_label(r));
        header.push_back("Decline");
        CsvWriter csv((out / "noise.csv").string(), header);
        json jrows = json::array();
        std::vector<Series> series;
        for (const auto& row : rep.rows) {
            std::vector<double> vals = {row.budget};
            vals.insert(vals.end(), row.acc.begin(), row.acc.end());
            vals.push_back(row.decline);
            csv.write_row(vals);
            jrows.push_back(json{{"budget", row.budget}, {"acc", row.acc},
                                 {"decline", row.decline}});
            series.push_back(Series{"BUDGET " + fmt_num(row.budget), rep.ratios, row.acc});
        }
        write_json((out / "noise.json").string(), json{{"ratios", rep.ratios}, {"rows", jrows}});
        line_plot((out / "noise.png").string(), "ACCURACY UNDER LABEL NOISE", "NOISE RATIO",
                  "ACCURACY", series);
    }
    return rep;
}

AttackReport run_attack(const config::TrainConfig& cfg) {
    const auto prep = pipeline::prepare_data(cfg);
    const auto& split = prep.split;
    const std::vector<ImageSample>& pre_src =
        split.unlabeled.empty() ? split.labeled : split.unlabeled;
    const auto pre =
        pretrain::run_pretrain(cfg.pretrain, cfg.model, strip_labels(pre_src), cfg.seed, "");
    const auto sup = supervised::run_supervised(cfg.supervised, pre.state, split.labeled, {},
                                                prep.boxes, cfg.seed, "");

    const int cap = cfg.experiments.attack.max_images;
    const auto take = static_cast<std::ptrdiff_t>(
        std::min<size_t>(split.test.size(), static_cast<size_t>(std::max(cap, 0))));
    std::vector<ImageSample> subset(split.test.begin(), split.test.begin() + take);
    check(!subset.empty(), "attack: no test images to attack");

    AttackReport rep;
    rep.images = static_cast<int>(subset.size());
    rep.clean_acc = evalkit::evaluate(sup.state, subset).accuracy;
    rep.table = evalkit::attack_experiment(sup.state, subset, cfg.experiments.attack.epsilons,
                                           nullptr, cfg.experiments.attack.threshold);

    if (!cfg.output_dir.empty()) {
        const fs::path out(cfg.output_dir);
        fs::create_directories(out);
        std::vector<std::string> header = {"region"};
        for (double e : rep.table.epsilons) header.push_back("eps_" + fmt_num(e));
        CsvWriter csv((out / "attack.csv").string(), header);
        auto write_region = [&](const char* name, const std::vector<double>& acc) {
            std::vector<std::string> row = {name};
            for (double a : acc) row.push_back(fmt_num(a));
            csv.write_row_strings(row);
        };
        write_region("focused", rep.table.focused_acc);
        write_region("unfocused", rep.table.unfocused_acc);
        write_json((out / "attack.json").string(),
                   json{{"clean_acc", rep.clean_acc},
                        {"images", rep.images},
                        {"epsilons", rep.table.epsilons},
                        {"focused_acc", rep.table.focused_acc},
                        {"unfocused_acc", rep.table.unfocused_acc}});
        line_plot((out / "attack.png").string(), "ACCURACY UNDER FGSM ATTACK", "EPSILON",
                  "ACCURACY",
                  {Series{"FOCUSED", rep.table.epsilons, rep.table.focused_acc},
                   Series{"UNFOCUSED", rep.table.epsilons, rep.table.unfocused_acc}});
    }
    return rep;
}

MaskRatioReport run_maskratio(const config::TrainConfig& cfg) {
    std::vector<data::SynthSample> samples;
    if (cfg.data.source == "synth") {
        data::SynthSpec spec;
        spec.n_samples = cfg.data.synth.n_samples;
        spec.class_count = cfg.data.synth.class_count;
        spec.image_size = cfg.data.synth.image_size;
        spec.jitter = cfg.data.synth.jitter;
        spec.seed = derive_seed(cfg.seed, pipeline::seed_ord::data_gen);
        samples = data::synth_generate_detailed(spec);
    } else {
        // no region annotations here, so the expression-error column reads 0
        for (auto& img : all_samples(cfg)) {
            data::SynthSample s;
            s.sample = std::move(img);
            s.expression_mask.assign(
                static_cast<size_t>(s.sample.pixels.height) * s.sample.pixels.width, 0);
            samples.push_back(std::move(s));
        }
    }
    MaskRatioReport rep;
    rep.rows = pretrain::mask_ratio_study(cfg.experiments.maskratio.ratios, cfg.pretrain,
                                          cfg.model, samples, cfg.seed, cfg.output_dir);
    if (!cfg.output_dir.empty()) {
        json jrows = json::array();
        for (const auto& r : rep.rows)
            jrows.push_back(json{{"ratio", r.ratio},
                                 {"masked_mse", r.masked_mse},
                                 {"expression_mse", r.expression_mse}});
        write_json((fs::path(cfg.output_dir) / "maskratio.json").string(),
                   json{{"rows", jrows}});
    }
    return rep;
}

HpoReport run_hpo(const config::TrainConfig& cfg) {
    const auto prep = pipeline::prepare_data(cfg);
    const auto& split = prep.split;
    const std::vector<ImageSample>& pre_src =
        split.unlabeled.empty() ? split.labeled : split.unlabeled;
    const auto pre =
        pretrain::run_pretrain(cfg.pretrain, cfg.model, strip_labels(pre_src), cfg.seed, "");

    // proxy runs score on a slice carved off the labeled set, keeping the
    // test split untouched
    std::vector<ImageSample> train = split.labeled;
    std::vector<ImageSample> val;
    if (train.size() >= 20) {
        auto [tr, va] = data::split_holdout(
            train, 0.25, cfg.model.class_count,
            derive_seed(derive_seed(cfg.seed, pipeline::seed_ord::hpo_proxy), 1));
        train = std::move(tr);
        val = std::move(va);
    } else {
        val = split.test;
    }

    hpo::LrSearchConfig scfg;
    scfg.wolves = cfg.experiments.hpo.wolves;
    scfg.iterations = cfg.experiments.hpo.iterations;
    scfg.proxy_epochs = cfg.experiments.hpo.proxy_epochs;
    scfg.log10_lo = cfg.experiments.hpo.log10_lo;
    scfg.log10_hi = cfg.experiments.hpo.log10_hi;

    HpoReport rep;
    rep.search = hpo::lr_search(scfg, cfg.supervised, pre.state, train, val, prep.boxes, cfg.seed);

    if (!cfg.output_dir.empty()) {
        const fs::path out(cfg.output_dir);
        fs::create_directories(out);
        const auto& g = rep.search.search;
        {
            CsvWriter csv((out / "search_log.csv").string(),
                          {"iteration", "best_fitness", "best_position_0", "best_position_1",
                           "best_position_2"});
            for (size_t i = 0; i < g.history.size(); ++i) {
                std::vector<double> row = {static_cast<double>(i + 1), g.history[i]};
                row.insert(row.end(), g.history_position[i].begin(),
                           g.history_position[i].end());
                csv.write_row(row);
            }
        }
        write_json((out / "hpo.json").string(),
                   json{{"tuned", rep.search.tuned},
                        {"base_lr", rep.search.config.base_lr},
                        {"min_lr", rep.search.config.min_lr},
                        {"warmup_init_lr", rep.search.config.warmup_init_lr},
                        {"proxy_best_acc", rep.search.proxy_best_acc},
                        {"evaluations", g.evaluations}});
        std::vector<double> xs(g.history.size());
        std::iota(xs.begin(), xs.end(), 1.0);
        line_plot((out / "hpo.png").string(), "LR SEARCH PROGRESS", "ITERATION",
                  "BEST FITNESS", {Series{"BEST", xs, g.history}});
    }
    return rep;
}

CompareReport run_semicompare(const config::TrainConfig& cfg) {
    CompareReport rep;
    for (uint64_t s : cfg.experiments.semicompare.seeds) {
        config::TrainConfig c = cfg;
        c.seed = s;
        c.output_dir.clear();
        const auto prep = pipeline::prepare_data(c);
        const auto& split = prep.split;
        const std::vector<ImageSample>& pre_src =
            split.unlabeled.empty() ? split.labeled : split.unlabeled;
        const auto a = pretrain::run_pretrain(c.pretrain, c.model, strip_labels(pre_src), s, "");
        const auto b = supervised::run_supervised(c.supervised, a.state, split.labeled, {},
                                                  prep.boxes, s, "");
        CompareRow row;
        row.seed = s;
        for (auto mode : {semisup::TeacherMode::ema_teacher, semisup::TeacherMode::fixmatch}) {
            semisup::SemiSupConfig sc = c.semisup;
            sc.mode = mode;
            const auto r =
                semisup::run_semisup(sc, b.state, split.labeled, split.unlabeled, {}, s, "");
            const double acc = evalkit::evaluate(r.final_state, split.test).accuracy;
            (mode == semisup::TeacherMode::ema_teacher ? row.ema : row.fixmatch) = acc;
        }
        log_info("semicompare: seed " + std::to_string(s) + " ema " + fmt_num(row.ema) +
                 " fixmatch " + fmt_num(row.fixmatch));
        rep.rows.push_back(row);
    }
    for (const auto& r : rep.rows) {
        rep.ema_mean += r.ema;
        rep.fixmatch_mean += r.fixmatch;
    }
    rep.ema_mean /= rep.rows.size();
    rep.fixmatch_mean /= rep.rows.size();

    if (!cfg.output_dir.empty()) {
        const fs::path out(cfg.output_dir);
        fs::create_directories(out);
        CsvWriter csv((out / "semicompare.csv").string(), {"seed", "ema_teacher", "fixmatch"});
        json jrows = json::array();
        for (const auto& r : rep.rows) {
            csv.write_row_strings(
                {std::to_string(r.seed), fmt_num(r.ema), fmt_num(r.fixmatch)});
            jrows.push_back(json{{"seed", r.seed}, {"ema_teacher", r.ema},
                                 {"fixmatch", r.fixmatch}});
        }
        csv.write_row_strings({"mean", fmt_num(rep.ema_mean), fmt_num(rep.fixmatch_mean)});
        write_json((out / "semicompare.json").string(),
                   json{{"rows", jrows},
                        {"ema_mean", rep.ema_mean},
                        {"fixmatch_mean", rep.fixmatch_mean}});
        bar_plot((out / "semicompare.png").string(), "EMA TEACHER VS FIXMATCH",
                 {"EMA", "FIXMATCH"}, {rep.ema_mean, rep.fixmatch_mean});
    }
    return rep;
}

ComponentsReport run_components(const config::TrainConfig& cfg) {
    ComponentsReport rep;
    rep.arms = {"baseline", "+facemix", "+ema", "+both"};
    rep.acc.assign(rep.arms.size(), {});
    const auto& seeds = cfg.experiments.components.seeds;
    for (uint64_t s : seeds) {
        config::TrainConfig c = cfg;
        c.seed = s;
        c.output_dir.clear();
        const auto prep = pipeline::prepare_data(c);
        const auto& split = prep.split;
        const std::vector<ImageSample>& pre_src =
            split.unlabeled.empty() ? split.labeled : split.unlabeled;
        const auto a = pretrain::run_pretrain(c.pretrain, c.model, strip_labels(pre_src), s, "");

        supervised::SupervisedConfig plain = c.supervised;
        plain.mixing = supervised::Mixing::none;
        supervised::SupervisedConfig mixed = c.supervised;
        mixed.mixing = supervised::Mixing::facemix;
        const auto b_plain =
            supervised::run_supervised(plain, a.state, split.labeled, {}, prep.boxes, s, "");
        const auto b_mixed =
            supervised::run_supervised(mixed, a.state, split.labeled, {}, prep.boxes, s, "");

        auto eval_acc = [&](const nn::ModelState& st) {
            return evalkit::evaluate(st, split.test).accuracy;
        };
        rep.acc[0].push_back(eval_acc(b_plain.state));
        rep.acc[1].push_back(eval_acc(b_mixed.state));
        const auto c_plain = semisup::run_semisup(c.semisup, b_plain.state, split.labeled,
                                                  split.unlabeled, {}, s, "");
        rep.acc[2].push_back(eval_acc(c_plain.final_state));
        const auto c_mixed = semisup::run_semisup(c.semisup, b_mixed.state, split.labeled,
                                                  split.unlabeled, {}, s, "");
        rep.acc[3].push_back(eval_acc(c_mixed.final_state));
        log_info("components: seed " + std::to_string(s) + " done");
    }
    for (const auto& arm : rep.acc)
        rep.mean.push_back(std::accumulate(arm.begin(), arm.end(), 0.0) / arm.size());

    if (!cfg.output_dir.empty()) {
        const fs::path out(cfg.output_dir);
        fs::create_directories(out);
        std::vector<std::string> header = {"arm"};
        for (uint64_t s : seeds) header.push_back("seed_" + std::to_string(s));
        header.push_back("mean");
        CsvWriter csv((out / "components.csv").string(), header);
        json jrows = json::array();
        for (size_t i = 0; i < rep.arms.size(); ++i) {
            std::vector<std::string> row = {rep.arms[i]};
            for (double a : rep.acc[i]) row.push_back(fmt_num(a));
            row.push_back(fmt_num(rep.mean[i]));
            csv.write_row_strings(row);
            jrows.push_back(json{{"arm", rep.arms[i]}, {"acc", rep.acc[i]},
                                 {"mean", rep.mean[i]}});
        }
        write_json((out / "components.json").string(), json{{"rows", jrows}});
        std::vector<std::string> labels;
        for (const auto& a : rep.arms) {
            std::string u = a;
            std::transform(u.begin(), u.end(), u.begin(),
                           [](unsigned char ch) { return std::toupper(ch); });
            labels.push_back(u);
        }
        bar_plot((out / "components.png").string(), "COMPONENT ABLATION", labels, rep.mean);
    }
    return rep;
}

void run_experiment(const std::string& name, const config::TrainConfig& cfg, bool overwrite) {
    const auto names = experiment_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        std::string avail;
        for (const auto& n : names) avail += (avail.empty() ? "" : ", ") + n;
        fail("unknown experiment '", name, "' (available: ", avail, ")");
    }
    cfg.validate();
    check(!cfg.output_dir.empty(), "experiment: output_dir must be set");
    pipeline::claim_output_dir(cfg.output_dir, overwrite);
    config::save_config((fs::path(cfg.output_dir) / "config.json").string(), cfg);

    if (name == "kfold") run_kfold(cfg);
    else if (name == "noise") run_noise(cfg);
    else if (name == "attack") run_attack(cfg);
    else if (name == "maskratio") run_maskratio(cfg);
    else if (name == "hpo") run_hpo(cfg);
    else if (name == "semicompare") run_semicompare(cfg);
    else run_components(cfg);
}

}  // namespace ssfer::experiments
