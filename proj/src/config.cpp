#include "ssfer/config.hpp"

#include <fstream>
#include <set>

#include "ssfer/checkpoint.hpp"

using json = nlohmann::json;

namespace ssfer::config {

data::LabelBudget DataConfig::budget() const {
    data::LabelBudget b;
    if (budget_kind == "per_class")
        b.kind = data::LabelBudget::Kind::per_class;
    else if (budget_kind == "fraction")
        b.kind = data::LabelBudget::Kind::fraction;
    else
        fail("config: unknown budget kind '", budget_kind, "' (expected per_class/fraction)");
    b.value = budget_value;
    return b;
}

data::BoxProvider DataConfig::make_box_provider() const {
    if (box_provider == "stored") return data::StoredBoxes{};
    if (box_provider == "full_image") return data::FullImageBoxes{};
    if (box_provider == "sidecar") {
        check(!sidecar_path.empty(), "config: sidecar box provider needs data.sidecar_path");
        return data::load_box_sidecar(sidecar_path);
    }
    fail("config: unknown box provider '", box_provider,
         "' (expected stored/full_image/sidecar)");
}

void TrainConfig::validate() const {
    model.validate();
    check(!output_dir.empty(), "config: output_dir must not be empty");

    if (data.source == "synth") {
        check(data.synth.n_samples > 0, "config: data.synth.n_samples must be positive");
        check(data.synth.image_size == model.image_size,
              "config: data.synth.image_size must match model.image_size");
        check(data.synth.class_count == model.class_count,
              "config: data.synth.class_count must match model.class_count");
        check(data.synth.jitter >= 0.0 && data.synth.jitter <= 1.0,
              "config: data.synth.jitter must be in [0,1]");
    } else if (data.source == "manifest") {
        check(!data.manifest_path.empty(), "config: data.manifest_path must be set");
    } else {
        fail("config: unknown data source '", data.source, "' (expected synth/manifest)");
    }
    check(data.test_fraction >= 0.0 && data.test_fraction < 1.0,
          "config: data.test_fraction must be in [0,1)");
    data.budget();  // validates the kind
    check(data.budget_value >= 0.0, "config: data.budget_value must be >= 0");
    if (data.budget_kind == "fraction")
        check(data.budget_value <= 1.0, "config: fraction budget must be <= 1");
    check(data.noise_ratio >= 0.0 && data.noise_ratio <= 1.0,
          "config: data.noise_ratio must be in [0,1]");
    check(data.box_provider == "stored" || data.box_provider == "full_image" ||
              data.box_provider == "sidecar",
          "config: unknown box provider '" + data.box_provider + "'");

    check(pretrain.epochs >= 0, "config: pretrain.epochs must be >= 0");
    check(pretrain.warmup_epochs >= 0 && pretrain.warmup_epochs <= pretrain.epochs,
          "config: pretrain.warmup_epochs must be in [0, epochs]");
    check(pretrain.base_lr > 0.0, "config: pretrain.base_lr must be positive");
    check(pretrain.batch_size >= 1, "config: pretrain.batch_size must be >= 1");
    check(pretrain.mask_ratio > 0.0 && pretrain.mask_ratio < 1.0,
          "config: pretrain.mask_ratio must be in (0,1)");

    check(supervised.epochs >= 0, "config: supervised.epochs must be >= 0");
    check(supervised.batch_size >= 1, "config: supervised.batch_size must be >= 1");
    check(supervised.min_lr <= supervised.base_lr,
          "config: supervised.min_lr must be <= base_lr");
    check(supervised.mixup_alpha > 0.0, "config: supervised.mixup_alpha must be positive");
    supervised::facemix_weights(supervised.facemix_variant, 0.0);  // validates the tag

    check(semisup.epochs >= 0, "config: semisup.epochs must be >= 0");
    check(semisup.batch_size >= 1 && semisup.unlabeled_batch_size >= 1,
          "config: semisup batch sizes must be >= 1");
    check(semisup.tau > 0.0 && semisup.tau < 1.0, "config: semisup.tau must be in (0,1)");
    check(semisup.mu >= 0.0, "config: semisup.mu must be >= 0");
    check(semisup.momentum >= 0.0 && semisup.momentum <= 1.0,
          "config: semisup.momentum must be in [0,1]");

    check(experiments.kfold.folds >= 2, "config: experiments.kfold.folds must be >= 2");
    check(!experiments.noise.ratios.empty(), "config: experiments.noise.ratios is empty");
    for (double r : experiments.noise.ratios)
        check(r >= 0.0 && r <= 1.0, "config: noise ratios must be in [0,1]");
    for (double b : experiments.noise.budgets) {
        check(b > 0.0, "config: noise budgets must be > 0");
        if (data.budget_kind == "fraction")
            check(b <= 1.0, "config: fraction noise budgets must be <= 1");
    }
    check(!experiments.attack.epsilons.empty(), "config: experiments.attack.epsilons is empty");
    for (double e : experiments.attack.epsilons)
        check(e >= 0.0, "config: attack epsilons must be >= 0");
    check(experiments.attack.max_images > 0, "config: attack.max_images must be positive");
    check(!experiments.maskratio.ratios.empty(),
          "config: experiments.maskratio.ratios is empty");
    for (double r : experiments.maskratio.ratios)
        check(r > 0.0 && r < 1.0, "config: maskratio ratios must be in (0,1)");
    check(experiments.hpo.wolves >= 4, "config: experiments.hpo.wolves must be >= 4");
    check(experiments.hpo.iterations >= 1, "config: experiments.hpo.iterations must be >= 1");
    check(experiments.hpo.log10_lo < experiments.hpo.log10_hi,
          "config: experiments.hpo log10 bounds out of order");
    check(!experiments.semicompare.seeds.empty(),
          "config: experiments.semicompare.seeds is empty");
    check(!experiments.components.seeds.empty(),
          "config: experiments.components.seeds is empty");
}

TrainConfig default_config() { return TrainConfig{}; }

namespace {

// strict object walker: every key must be consumed, unknown keys report
// their full path
class Cursor {
public:
    Cursor(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        check(j_.is_object(), "config: '" + (path_.empty() ? "<top>" : path_) +
                                  "' must be a JSON object");
    }

    std::string keypath(const std::string& k) const {
        return path_.empty() ? k : path_ + "." + k;
    }

    bool has(const std::string& k) const { return j_.contains(k); }

    template <class T>
    void opt(const std::string& k, T& out) {
        if (!j_.contains(k)) return;
        seen_.insert(k);
        try {
            out = j_.at(k).get<T>();
        } catch (const json::exception&) {
            fail("config: bad value for key '", keypath(k), "'");
        }
    }

    const json* obj(const std::string& k) {
        if (!j_.contains(k)) return nullptr;
        seen_.insert(k);
        return &j_.at(k);
    }

    void finish() const {
        for (const auto& el : j_.items())
            if (!seen_.count(el.key()))
                fail("config: unknown key '", keypath(el.key()), "'");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_pretrain(const json& j, pretrain::PretrainConfig& c) {
    Cursor cur(j, "pretrain");
    cur.opt("epochs", c.epochs);
    cur.opt("warmup_epochs", c.warmup_epochs);
    cur.opt("base_lr", c.base_lr);
    cur.opt("batch_size", c.batch_size);
    cur.opt("mask_ratio", c.mask_ratio);
    cur.opt("normalize_targets", c.normalize_targets);
    cur.opt("weight_decay", c.weight_decay);
    cur.opt("beta1", c.beta1);
    cur.opt("beta2", c.beta2);
    cur.finish();
}

void read_supervised(const json& j, supervised::SupervisedConfig& c) {
    Cursor cur(j, "supervised");
    cur.opt("epochs", c.epochs);
    cur.opt("warmup_epochs", c.warmup_epochs);
    cur.opt("base_lr", c.base_lr);
    cur.opt("min_lr", c.min_lr);
    cur.opt("warmup_init_lr", c.warmup_init_lr);
    cur.opt("batch_size", c.batch_size);
    std::string mixing = supervised::to_string(c.mixing);
    cur.opt("mixing", mixing);
    c.mixing = supervised::mixing_from_string(mixing);
    cur.opt("facemix_variant", c.facemix_variant);
    std::string metric = aug::to_string(c.kappa_metric);
    cur.opt("kappa_metric", metric);
    c.kappa_metric = aug::kappa_metric_from_string(metric);
    cur.opt("mixup_alpha", c.mixup_alpha);
    cur.opt("auto_extend_small_labels", c.auto_extend_small_labels);
    cur.opt("small_label_threshold", c.small_label_threshold);
    cur.opt("extend_factor", c.extend_factor);
    cur.opt("weight_decay", c.weight_decay);
    cur.opt("beta1", c.beta1);
    cur.opt("beta2", c.beta2);
    cur.finish();
}

void read_semisup(const json& j, semisup::SemiSupConfig& c) {
    Cursor cur(j, "semisup");
    cur.opt("epochs", c.epochs);
    cur.opt("warmup_epochs", c.warmup_epochs);
    cur.opt("base_lr", c.base_lr);
    cur.opt("min_lr", c.min_lr);
    cur.opt("warmup_init_lr", c.warmup_init_lr);
    cur.opt("batch_size", c.batch_size);
    cur.opt("unlabeled_batch_size", c.unlabeled_batch_size);
    cur.opt("tau", c.tau);
    cur.opt("mu", c.mu);
    cur.opt("momentum", c.momentum);
    std::string mode = semisup::to_string(c.mode);
    cur.opt("mode", mode);
    c.mode = semisup::teacher_mode_from_string(mode);
    cur.opt("weight_decay", c.weight_decay);
    cur.opt("beta1", c.beta1);
    cur.opt("beta2", c.beta2);
    cur.finish();
}

void read_data(const json& j, DataConfig& c) {
    Cursor cur(j, "data");
    cur.opt("source", c.source);
    if (const json* s = cur.obj("synth")) {
        Cursor sc(*s, "data.synth");
        sc.opt("n_samples", c.synth.n_samples);
        sc.opt("class_count", c.synth.class_count);
        sc.opt("image_size", c.synth.image_size);
        sc.opt("jitter", c.synth.jitter);
        sc.finish();
    }
    cur.opt("manifest_path", c.manifest_path);
    cur.opt("test_fraction", c.test_fraction);
    cur.opt("budget_kind", c.budget_kind);
    cur.opt("budget_value", c.budget_value);
    cur.opt("noise_ratio", c.noise_ratio);
    cur.opt("box_provider", c.box_provider);
    cur.opt("sidecar_path", c.sidecar_path);
    cur.finish();
}

void read_experiments(const json& j, ExperimentsConfig& c) {
    Cursor cur(j, "experiments");
    if (const json* k = cur.obj("kfold")) {
        Cursor kc(*k, "experiments.kfold");
        kc.opt("folds", c.kfold.folds);
        kc.finish();
    }
    if (const json* n = cur.obj("noise")) {
        Cursor nc(*n, "experiments.noise");
        nc.opt("ratios", c.noise.ratios);
        nc.opt("budgets", c.noise.budgets);
        nc.finish();
    }
    if (const json* a = cur.obj("attack")) {
        Cursor ac(*a, "experiments.attack");
        ac.opt("epsilons", c.attack.epsilons);
        ac.opt("threshold", c.attack.threshold);
        ac.opt("max_images", c.attack.max_images);
        ac.finish();
    }
    if (const json* m = cur.obj("maskratio")) {
        Cursor mc(*m, "experiments.maskratio");
        mc.opt("ratios", c.maskratio.ratios);
        mc.finish();
    }
    if (const json* h = cur.obj("hpo")) {
        Cursor hc(*h, "experiments.hpo");
        hc.opt("wolves", c.hpo.wolves);
        hc.opt("iterations", c.hpo.iterations);
        hc.opt("proxy_epochs", c.hpo.proxy_epochs);
        hc.opt("log10_lo", c.hpo.log10_lo);
        hc.opt("log10_hi", c.hpo.log10_hi);
        hc.finish();
    }
    if (const json* s = cur.obj("semicompare")) {
        Cursor sc(*s, "experiments.semicompare");
        sc.opt("seeds", c.semicompare.seeds);
        sc.finish();
    }
    if (const json* s = cur.obj("components")) {
        Cursor sc(*s, "experiments.components");
        sc.opt("seeds", c.components.seeds);
        sc.finish();
    }
    cur.finish();
}

}  // namespace

TrainConfig config_from_json(const json& j) {
    TrainConfig cfg;
    Cursor cur(j, "");
    for (const char* required : {"seed", "output_dir"})
        if (!cur.has(required)) fail("config: missing required key '", required, "'");
    cur.opt("seed", cfg.seed);
    cur.opt("output_dir", cfg.output_dir);
    if (const json* m = cur.obj("model"))
        cfg.model = nn::model_config_from_json(*m, "config");
    if (const json* p = cur.obj("pretrain")) read_pretrain(*p, cfg.pretrain);
    if (const json* s = cur.obj("supervised")) read_supervised(*s, cfg.supervised);
    if (const json* s = cur.obj("semisup")) read_semisup(*s, cfg.semisup);
    if (const json* d = cur.obj("data")) read_data(*d, cfg.data);
    if (const json* e = cur.obj("experiments")) read_experiments(*e, cfg.experiments);
    cur.finish();

    // synth geometry follows the model unless the file pins it explicitly
    if (cfg.data.source == "synth") {
        const json* d = j.contains("data") ? &j.at("data") : nullptr;
        const json* s = d && d->contains("synth") ? &d->at("synth") : nullptr;
        if (!s || !s->contains("image_size")) cfg.data.synth.image_size = cfg.model.image_size;
        if (!s || !s->contains("class_count")) cfg.data.synth.class_count = cfg.model.class_count;
    }

    cfg.validate();
    return cfg;
}

json config_to_json(const TrainConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["model"] = nn::model_config_to_json(c.model);
    j["pretrain"] = json{{"epochs", c.pretrain.epochs},
                         {"warmup_epochs", c.pretrain.warmup_epochs},
                         {"base_lr", c.pretrain.base_lr},
                         {"batch_size", c.pretrain.batch_size},
                         {"mask_ratio", c.pretrain.mask_ratio},
                         {"normalize_targets", c.pretrain.normalize_targets},
                         {"weight_decay", c.pretrain.weight_decay},
                         {"beta1", c.pretrain.beta1},
                         {"beta2", c.pretrain.beta2}};
    j["supervised"] = json{{"epochs", c.supervised.epochs},
                           {"warmup_epochs", c.supervised.warmup_epochs},
                           {"base_lr", c.supervised.base_lr},
                           {"min_lr", c.supervised.min_lr},
                           {"warmup_init_lr", c.supervised.warmup_init_lr},
                           {"batch_size", c.supervised.batch_size},
                           {"mixing", supervised::to_string(c.supervised.mixing)},
                           {"facemix_variant", c.supervised.facemix_variant},
                           {"kappa_metric", aug::to_string(c.supervised.kappa_metric)},
                           {"mixup_alpha", c.supervised.mixup_alpha},
                           {"auto_extend_small_labels", c.supervised.auto_extend_small_labels},
                           {"small_label_threshold", c.supervised.small_label_threshold},
                           {"extend_factor", c.supervised.extend_factor},
                           {"weight_decay", c.supervised.weight_decay},
                           {"beta1", c.supervised.beta1},
                           {"beta2", c.supervised.beta2}};
    j["semisup"] = json{{"epochs", c.semisup.epochs},
                        {"warmup_epochs", c.semisup.warmup_epochs},
                        {"base_lr", c.semisup.base_lr},
                        {"min_lr", c.semisup.min_lr},
                        {"warmup_init_lr", c.semisup.warmup_init_lr},
                        {"batch_size", c.semisup.batch_size},
                        {"unlabeled_batch_size", c.semisup.unlabeled_batch_size},
                        {"tau", c.semisup.tau},
                        {"mu", c.semisup.mu},
                        {"momentum", c.semisup.momentum},
                        {"mode", semisup::to_string(c.semisup.mode)},
                        {"weight_decay", c.semisup.weight_decay},
                        {"beta1", c.semisup.beta1},
                        {"beta2", c.semisup.beta2}};
    j["data"] = json{{"source", c.data.source},
                     {"synth", json{{"n_samples", c.data.synth.n_samples},
                                    {"class_count", c.data.synth.class_count},
                                    {"image_size", c.data.synth.image_size},
                                    {"jitter", c.data.synth.jitter}}},
                     {"manifest_path", c.data.manifest_path},
                     {"test_fraction", c.data.test_fraction},
                     {"budget_kind", c.data.budget_kind},
                     {"budget_value", c.data.budget_value},
                     {"noise_ratio", c.data.noise_ratio},
                     {"box_provider", c.data.box_provider},
                     {"sidecar_path", c.data.sidecar_path}};
    j["experiments"] =
        json{{"kfold", json{{"folds", c.experiments.kfold.folds}}},
             {"noise", json{{"ratios", c.experiments.noise.ratios},
                             {"budgets", c.experiments.noise.budgets}}},
             {"attack", json{{"epsilons", c.experiments.attack.epsilons},
                             {"threshold", c.experiments.attack.threshold},
                             {"max_images", c.experiments.attack.max_images}}},
             {"maskratio", json{{"ratios", c.experiments.maskratio.ratios}}},
             {"hpo", json{{"wolves", c.experiments.hpo.wolves},
                          {"iterations", c.experiments.hpo.iterations},
                          {"proxy_epochs", c.experiments.hpo.proxy_epochs},
                          {"log10_lo", c.experiments.hpo.log10_lo},
                          {"log10_hi", c.experiments.hpo.log10_hi}}},
             {"semicompare", json{{"seeds", c.experiments.semicompare.seeds}}},
             {"components", json{{"seeds", c.experiments.components.seeds}}}};
    return j;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "config: cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        fail("config: ", path, " is not valid JSON (", e.what(), ")");
    }
    return config_from_json(j);
}

void save_config(const std::string& path, const TrainConfig& cfg) {
    std::ofstream out(path);
    check(out.good(), "config: cannot write " + path);
    out << config_to_json(cfg).dump(2) << "\n";
}

}  // namespace ssfer::config
