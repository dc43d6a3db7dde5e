#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "helpers.hpp"
#include "ssfer/config.hpp"

using namespace ssfer;
using namespace ssfer::config;
using json = nlohmann::json;

namespace {

std::string error_of(const json& j) {
    try {
        config_from_json(j);
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

json base_json() {
    TrainConfig c = default_config();
    c.output_dir = "out";
    return config_to_json(c);
}

}  // namespace

TEST_CASE("defaults carry the published training recipe") {
    const TrainConfig c = default_config();

    CHECK(c.pretrain.base_lr == doctest::Approx(3.4e-4));
    CHECK(c.pretrain.epochs == 600);
    CHECK(c.pretrain.warmup_epochs == 50);
    CHECK(c.pretrain.batch_size == 256);
    CHECK(c.pretrain.mask_ratio == doctest::Approx(0.75));
    CHECK(c.pretrain.normalize_targets);

    CHECK(c.supervised.base_lr == doctest::Approx(1e-4));
    CHECK(c.supervised.min_lr == doctest::Approx(1e-5));
    CHECK(c.supervised.warmup_init_lr == doctest::Approx(5e-5));
    CHECK(c.supervised.epochs == 100);
    CHECK(c.supervised.warmup_epochs == 5);
    CHECK(c.supervised.batch_size == 32);
    CHECK(c.supervised.mixing == supervised::Mixing::facemix);
    CHECK(c.supervised.facemix_variant == "L4");
    CHECK(c.supervised.kappa_metric == aug::KappaMetric::iou);
    CHECK(c.supervised.mixup_alpha == doctest::Approx(0.2));

    CHECK(c.semisup.base_lr == doctest::Approx(1.5e-4));
    CHECK(c.semisup.epochs == 50);
    CHECK(c.semisup.batch_size == 64);
    CHECK(c.semisup.unlabeled_batch_size == 64);
    CHECK(c.semisup.tau == doctest::Approx(0.95));
    CHECK(c.semisup.mu == doctest::Approx(1.0));
    CHECK(c.semisup.momentum == doctest::Approx(0.999));
    CHECK(c.semisup.mode == semisup::TeacherMode::ema_teacher);

    CHECK(c.data.test_fraction == doctest::Approx(0.2));
    CHECK(c.data.budget_kind == "fraction");
    CHECK(c.data.budget_value == doctest::Approx(0.1));

    CHECK(c.experiments.kfold.folds == 5);
    CHECK(c.experiments.noise.ratios == std::vector<double>{0.0, 0.1, 0.2, 0.3});
    CHECK(c.experiments.attack.epsilons ==
          std::vector<double>{0.0, 0.02, 0.04, 0.06, 0.08, 0.10});
    CHECK(c.experiments.attack.threshold == doctest::Approx(0.3));
    CHECK(c.experiments.maskratio.ratios == std::vector<double>{0.5, 0.75, 0.9});
}

TEST_CASE("json round trip is lossless") {
    const json j = base_json();
    const TrainConfig c = config_from_json(j);
    CHECK(config_to_json(c).dump() == j.dump());
    CHECK(c.output_dir == "out");
}

TEST_CASE("save load save is byte identical") {
    const auto dir = testutil::temp_dir("cfg_bytes");
    TrainConfig c = default_config();
    c.output_dir = "somewhere";
    c.seed = 42;
    const std::string p1 = (dir / "a.json").string();
    const std::string p2 = (dir / "b.json").string();
    save_config(p1, c);
    save_config(p2, load_config(p1));
    CHECK(testutil::read_file(p1) == testutil::read_file(p2));
}

TEST_CASE("unknown keys are rejected with their full path") {
    json j = base_json();
    j["experiments"]["hpo"]["xyz"] = 1;
    CHECK(error_of(j).find("unknown key 'experiments.hpo.xyz'") != std::string::npos);

    json j2 = base_json();
    j2["frobnicate"] = true;
    CHECK(error_of(j2).find("unknown key 'frobnicate'") != std::string::npos);

    json j3 = base_json();
    j3["data"]["synth"]["color"] = "red";
    CHECK(error_of(j3).find("unknown key 'data.synth.color'") != std::string::npos);
}

TEST_CASE("seed and output_dir are required") {
    json j = base_json();
    j.erase("seed");
    CHECK(error_of(j).find("missing required key 'seed'") != std::string::npos);

    json j2 = base_json();
    j2.erase("output_dir");
    CHECK(error_of(j2).find("missing required key 'output_dir'") != std::string::npos);
}

TEST_CASE("bad values name the offending key") {
    json j = base_json();
    j["pretrain"]["epochs"] = "many";
    CHECK(error_of(j).find("bad value for key 'pretrain.epochs'") != std::string::npos);

    json j2 = base_json();
    j2["semisup"]["tau"] = json::array({1, 2});
    CHECK(error_of(j2).find("bad value for key 'semisup.tau'") != std::string::npos);
}

TEST_CASE("synth geometry follows the model unless pinned") {
    json j = base_json();
    j["model"]["image_size"] = 16;
    j["model"]["class_count"] = 4;
    j["data"].erase("synth");
    const TrainConfig c = config_from_json(j);
    CHECK(c.data.synth.image_size == 16);
    CHECK(c.data.synth.class_count == 4);

    // an explicit pin that disagrees with the model is an error
    json j2 = base_json();
    j2["model"]["image_size"] = 16;
    CHECK(error_of(j2).find("image_size") != std::string::npos);
}

TEST_CASE("validation rejects out-of-range settings") {
    auto expect_reject = [](void (*mutate)(json&)) {
        json j = base_json();
        mutate(j);
        CHECK_THROWS_AS((void)config_from_json(j), Error);
    };
    expect_reject([](json& j) { j["data"]["test_fraction"] = 1.0; });
    expect_reject([](json& j) { j["data"]["budget_value"] = 1.5; });
    expect_reject([](json& j) { j["data"]["noise_ratio"] = -0.2; });
    expect_reject([](json& j) { j["data"]["source"] = "imagenet"; });
    expect_reject([](json& j) { j["semisup"]["tau"] = 0.0; });
    expect_reject([](json& j) { j["semisup"]["tau"] = 1.0; });
    expect_reject([](json& j) { j["semisup"]["momentum"] = 1.5; });
    expect_reject([](json& j) { j["pretrain"]["mask_ratio"] = 1.0; });
    expect_reject([](json& j) { j["pretrain"]["warmup_epochs"] = 10000; });
    expect_reject([](json& j) { j["supervised"]["facemix_variant"] = "L9"; });
    expect_reject([](json& j) { j["experiments"]["kfold"]["folds"] = 1; });
    expect_reject([](json& j) { j["experiments"]["hpo"]["wolves"] = 3; });
    expect_reject([](json& j) { j["experiments"]["hpo"]["log10_lo"] = -1.0; });
    expect_reject([](json& j) { j["experiments"]["noise"]["budgets"] = json::array({1.5}); });
    expect_reject([](json& j) { j["experiments"]["attack"]["epsilons"] = json::array(); });
}

TEST_CASE("budget and box provider mappings") {
    TrainConfig c = default_config();
    c.data.budget_kind = "per_class";
    c.data.budget_value = 25;
    const auto b = c.data.budget();
    CHECK(b.kind == data::LabelBudget::Kind::per_class);
    CHECK(b.value == doctest::Approx(25));

    c.data.budget_kind = "weird";
    CHECK_THROWS_AS((void)c.data.budget(), Error);

    c.data.budget_kind = "fraction";
    c.data.box_provider = "sidecar";
    c.data.sidecar_path = "";
    CHECK_THROWS_AS((void)c.data.make_box_provider(), Error);
}

TEST_CASE("config file errors are descriptive") {
    const auto dir = testutil::temp_dir("cfg_file");
    CHECK_THROWS(load_config((dir / "missing.json").string()));

    const auto bad = dir / "bad.json";
    {
        std::ofstream out(bad);
        out << "{oops";
    }
    try {
        load_config(bad.string());
        CHECK(false);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("not valid JSON") != std::string::npos);
    }
}
