#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "helpers.hpp"
#include "ssfer/dataset.hpp"
#include "ssfer/evalkit.hpp"
#include "ssfer/pretrain.hpp"
#include "ssfer/supervised.hpp"

using namespace ssfer;
namespace fs = std::filesystem;

namespace {

pretrain::PretrainConfig quick_pretrain(int epochs) {
    pretrain::PretrainConfig cfg;
    cfg.epochs = epochs;
    cfg.warmup_epochs = std::min(2, epochs);
    cfg.base_lr = 1e-3;
    cfg.batch_size = 8;
    cfg.mask_ratio = 0.75;
    return cfg;
}

supervised::SupervisedConfig quick_supervised(int epochs) {
    supervised::SupervisedConfig cfg;
    cfg.epochs = epochs;
    cfg.warmup_epochs = std::min(1, epochs);
    cfg.base_lr = 5e-4;
    cfg.min_lr = 1e-5;
    cfg.warmup_init_lr = 1e-5;
    cfg.batch_size = 5;
    cfg.auto_extend_small_labels = false;
    return cfg;
}

}  // namespace

TEST_CASE("every pretraining step masks exactly the floor count") {
    const auto mcfg = testutil::micro_model();
    const auto faces = testutil::micro_faces(12, 3, 4);

    for (double ratio : {0.5, 0.75}) {
        auto cfg = quick_pretrain(2);
        cfg.batch_size = 5;
        cfg.mask_ratio = ratio;
        const int want = static_cast<int>(std::floor(ratio * mcfg.n_patches()));
        int calls = 0;
        pretrain::run_pretrain(cfg, mcfg, faces, 3, "",
                               [&](int, int, int masked, double loss) {
                                   CHECK(masked == want);
                                   CHECK(std::isfinite(loss));
                                   ++calls;
                               });
        // one observation per sample per epoch
        CHECK(calls == 12 * 2);
    }
}

TEST_CASE("pretraining reduces the reconstruction loss") {
    const auto mcfg = testutil::micro_model();
    const auto faces = testutil::micro_faces(24, 3, 5);
    const auto res = pretrain::run_pretrain(quick_pretrain(20), mcfg, faces, 7, "");
    REQUIRE(res.history.size() == 20);
    CHECK(res.history.back().loss < res.history.front().loss);
}

TEST_CASE("zero pretraining epochs return the untouched init") {
    const auto mcfg = testutil::micro_model();
    const auto res = pretrain::run_pretrain(quick_pretrain(0), mcfg, {}, 11, "");
    CHECK(res.history.empty());
    CHECK(testutil::states_equal(res.state, nn::ModelState::init(mcfg, 11)));
}

TEST_CASE("pretraining is deterministic and writes its artifacts") {
    const auto dir = testutil::temp_dir("stage_pre");
    const auto mcfg = testutil::micro_model();
    const auto faces = testutil::micro_faces(10, 3, 6);
    const auto cfg = quick_pretrain(2);

    const auto a = pretrain::run_pretrain(cfg, mcfg, faces, 5, (dir / "run").string());
    const auto b = pretrain::run_pretrain(cfg, mcfg, faces, 5, "");
    CHECK(testutil::states_equal(a.state, b.state));

    CHECK(fs::exists(dir / "run" / "pretrain_final.json"));
    CHECK(fs::exists(dir / "run" / "pretrain_final.bin"));
    CHECK(fs::exists(dir / "run" / "pretrain_log.csv"));
    const std::string log = testutil::read_file(a.log_csv);
    CHECK(log.rfind("epoch,lr,loss\n", 0) == 0);

    // a different seed takes a different trajectory
    const auto c = pretrain::run_pretrain(cfg, mcfg, faces, 6, "");
    CHECK(!testutil::states_equal(a.state, c.state));
}

TEST_CASE("pretraining rejects images that do not fit the model") {
    const auto mcfg = testutil::micro_model();  // 16 px
    const auto wrong = data::synth_generate({4, 3, 32, 0.3, 1});
    CHECK_THROWS(pretrain::run_pretrain(quick_pretrain(1), mcfg, wrong, 0, ""));
}

TEST_CASE("plain mixup equals box mixing with full-frame boxes") {
    // full-frame boxes give overlap 1, so the mixing weight vanishes and the
    // L4 composite collapses to the virtual term alone
    const auto mcfg = testutil::micro_model();
    const auto init = nn::ModelState::init(mcfg, 9);
    const auto faces = testutil::micro_faces(10, 3, 8);

    auto mix = quick_supervised(3);
    mix.mixing = supervised::Mixing::mixup;
    auto fm = quick_supervised(3);
    fm.mixing = supervised::Mixing::facemix;
    fm.facemix_variant = "L4";
    fm.kappa_metric = aug::KappaMetric::iou;

    const auto ra = supervised::run_supervised(mix, init, faces, {}, data::StoredBoxes{}, 13, "");
    const auto rb = supervised::run_supervised(fm, init, faces, {}, data::FullImageBoxes{}, 13, "");
    CHECK(testutil::states_equal(ra.state, rb.state));
    REQUIRE(ra.history.size() == rb.history.size());
    for (size_t i = 0; i < ra.history.size(); ++i)
        CHECK(ra.history[i].loss == rb.history[i].loss);
}

TEST_CASE("supervised run tracks its best epoch") {
    const auto dir = testutil::temp_dir("stage_sup");
    const auto mcfg = testutil::micro_model();
    const auto init = nn::ModelState::init(mcfg, 2);
    const auto faces = testutil::micro_faces(12, 3, 9);
    const std::vector<ImageSample> train(faces.begin(), faces.begin() + 8);
    const std::vector<ImageSample> eval_set(faces.begin() + 8, faces.end());

    const auto res = supervised::run_supervised(quick_supervised(4), init, train, eval_set,
                                                data::StoredBoxes{}, 17, (dir / "run").string());
    REQUIRE(res.history.size() == 4);

    double best = -1.0;
    int best_epoch = 0;
    for (const auto& h : res.history)
        if (h.eval_acc > best) {
            best = h.eval_acc;
            best_epoch = h.epoch;
        }
    CHECK(res.best_acc == doctest::Approx(best));
    CHECK(res.best_epoch == best_epoch);
    CHECK(evalkit::evaluate(res.best_state, eval_set).accuracy == doctest::Approx(best));

    CHECK(fs::exists(dir / "run" / "supervised_final.json"));
    CHECK(fs::exists(dir / "run" / "supervised_best.json"));
    const std::string log = testutil::read_file(res.log_csv);
    CHECK(log.rfind("epoch,lr,loss,eval_acc\n", 0) == 0);

    // identical invocation reproduces the exact same model
    const auto again = supervised::run_supervised(quick_supervised(4), init, train, eval_set,
                                                  data::StoredBoxes{}, 17, "");
    CHECK(testutil::states_equal(res.state, again.state));
}

TEST_CASE("zero supervised epochs pass the init through") {
    const auto mcfg = testutil::micro_model();
    const auto init = nn::ModelState::init(mcfg, 4);
    const auto res =
        supervised::run_supervised(quick_supervised(0), init, {}, {}, data::StoredBoxes{}, 0, "");
    CHECK(res.history.empty());
    CHECK(testutil::states_equal(res.state, init));
    CHECK(testutil::states_equal(res.best_state, init));
}

TEST_CASE("small labeled sets extend the epoch budget") {
    const auto mcfg = testutil::micro_model();
    const auto init = nn::ModelState::init(mcfg, 4);
    const auto faces = testutil::micro_faces(4, 3, 10);

    auto cfg = quick_supervised(2);
    cfg.auto_extend_small_labels = true;
    cfg.small_label_threshold = 6;
    cfg.extend_factor = 3;
    const auto res =
        supervised::run_supervised(cfg, init, faces, {}, data::StoredBoxes{}, 1, "");
    CHECK(res.history.size() == 6);
}

TEST_CASE("a batch of one falls back to plain cross entropy") {
    const auto mcfg = testutil::micro_model();
    const auto init = nn::ModelState::init(mcfg, 6);
    const auto faces = testutil::micro_faces(1, 3, 12);
    auto cfg = quick_supervised(2);
    cfg.batch_size = 4;
    const auto res =
        supervised::run_supervised(cfg, init, faces, {}, data::StoredBoxes{}, 3, "");
    REQUIRE(res.history.size() == 2);
    CHECK(std::isfinite(res.history.back().loss));
}

TEST_CASE("labeled-set validation") {
    const auto mcfg = testutil::micro_model();
    const auto init = nn::ModelState::init(mcfg, 6);
    auto faces = testutil::micro_faces(4, 3, 13);

    auto bad = faces;
    bad[1].label = 7;
    CHECK_THROWS(supervised::run_supervised(quick_supervised(1), init, bad, {},
                                            data::StoredBoxes{}, 0, ""));
    auto unlab = faces;
    unlab[2].label.reset();
    CHECK_THROWS(supervised::run_supervised(quick_supervised(1), init, unlab, {},
                                            data::StoredBoxes{}, 0, ""));

    CHECK_THROWS(supervised::facemix_batch_loss(init, {}, supervised::Mixing::facemix, "L4",
                                                aug::KappaMetric::iou, 0.2,
                                                data::StoredBoxes{}, 0));
    std::vector<ImageSample> two(faces.begin(), faces.begin() + 2);
    std::vector<ImageSample> three(faces.begin(), faces.begin() + 3);
    CHECK_THROWS(supervised::facemix_batch_loss(init, two, supervised::Mixing::facemix, "L4",
                                                aug::KappaMetric::iou, 0.2, data::StoredBoxes{},
                                                0, nullptr, &three));
}

TEST_CASE("mask ratio study produces rows and artifacts") {
    const auto dir = testutil::temp_dir("stage_mrs");
    const auto mcfg = testutil::micro_model();
    const auto samples = data::synth_generate_detailed({12, 3, mcfg.image_size, 0.3, 2});

    auto cfg = quick_pretrain(1);
    cfg.batch_size = 4;
    const auto rows =
        pretrain::mask_ratio_study({0.5, 0.75}, cfg, mcfg, samples, 3, dir.string());
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(std::isfinite(r.masked_mse));
        CHECK(r.masked_mse > 0.0);
        CHECK(r.expression_mse >= 0.0);
    }
    CHECK(fs::exists(dir / "mask_ratio.csv"));
    CHECK(fs::exists(dir / "mask_ratio.png"));
    CHECK(fs::exists(dir / "recon_ratio_50.png"));
    CHECK(fs::exists(dir / "recon_ratio_75.png"));

    CHECK_THROWS(pretrain::mask_ratio_study({1.5}, cfg, mcfg, samples, 3, ""));
    CHECK_THROWS(pretrain::mask_ratio_study({}, cfg, mcfg, samples, 3, ""));
}
