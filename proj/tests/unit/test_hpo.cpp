#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "helpers.hpp"
#include "ssfer/hpo.hpp"

using namespace ssfer;
using namespace ssfer::hpo;

TEST_CASE("exploration scalar walks from 2 to 0") {
    CHECK(gwo_control_scalar(0, 200) == doctest::Approx(2.0));
    CHECK(gwo_control_scalar(199, 200) == doctest::Approx(0.0));
    CHECK(gwo_control_scalar(100, 201) == doctest::Approx(1.0));
    // degenerate horizons stay fully exploratory
    CHECK(gwo_control_scalar(0, 1) == doctest::Approx(2.0));
    CHECK(gwo_control_scalar(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("pack search converges on the sphere") {
    GwoConfig cfg;
    cfg.wolves = 12;
    cfg.iterations = 80;
    cfg.lower = {-5.0, -5.0};
    cfg.upper = {5.0, 5.0};
    const Objective sphere = [](const std::vector<double>& x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s;
    };

    const GwoResult r = gwo_optimize(cfg, sphere, 3);
    CHECK(r.best_fitness < 1e-3);
    CHECK(r.evaluations == 12 * 80);
    REQUIRE(r.history.size() == 80);
    REQUIRE(r.history_position.size() == 80);

    // best-so-far can never rise
    for (size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1]);
    CHECK(r.history.back() == doctest::Approx(r.best_fitness));
    CHECK(sphere(r.history_position.back()) == doctest::Approx(r.best_fitness));

    // within bounds
    for (double v : r.best) {
        CHECK(v >= -5.0);
        CHECK(v <= 5.0);
    }
}

TEST_CASE("pack search is deterministic in its seed") {
    GwoConfig cfg;
    cfg.wolves = 6;
    cfg.iterations = 12;
    cfg.lower = {-2.0};
    cfg.upper = {2.0};
    const Objective f = [](const std::vector<double>& x) { return std::abs(x[0] - 0.7); };

    const auto a = gwo_optimize(cfg, f, 11);
    const auto b = gwo_optimize(cfg, f, 11);
    CHECK(a.best == b.best);
    CHECK(a.history == b.history);
    const auto c = gwo_optimize(cfg, f, 12);
    CHECK((c.best != a.best || c.history != a.history));
}

TEST_CASE("a single iteration is plain random search over the pack") {
    GwoConfig cfg;
    cfg.wolves = 5;
    cfg.iterations = 1;
    cfg.lower = {0.0};
    cfg.upper = {1.0};
    int calls = 0;
    const Objective f = [&](const std::vector<double>& x) {
        ++calls;
        return x[0];
    };
    const auto r = gwo_optimize(cfg, f, 2);
    CHECK(calls == 5);
    CHECK(r.history.size() == 1);
}

TEST_CASE("injected seeds join the initial pack") {
    GwoConfig cfg;
    cfg.wolves = 4;
    cfg.iterations = 1;
    cfg.lower = {-1.0, -1.0};
    cfg.upper = {1.0, 1.0};
    cfg.seeds = {{0.0, 0.0}};  // the optimum, planted
    const Objective sphere = [](const std::vector<double>& x) {
        return x[0] * x[0] + x[1] * x[1];
    };
    const auto r = gwo_optimize(cfg, sphere, 4);
    CHECK(r.best_fitness == doctest::Approx(0.0));
    CHECK(r.best == std::vector<double>{0.0, 0.0});

    // seeds outside the bounds get clamped in
    cfg.seeds = {{5.0, -5.0}};
    const auto clamped = gwo_optimize(cfg, sphere, 4);
    CHECK(clamped.best_fitness <= 2.0 + 1e-12);

    cfg.seeds = {{1.0}};
    CHECK_THROWS(gwo_optimize(cfg, sphere, 4));
}

TEST_CASE("pack search input validation") {
    GwoConfig cfg;
    cfg.lower = {0.0};
    cfg.upper = {1.0};
    const Objective f = [](const std::vector<double>& x) { return x[0]; };

    cfg.wolves = 3;
    CHECK_THROWS(gwo_optimize(cfg, f, 0));
    cfg.wolves = 4;
    cfg.iterations = 0;
    CHECK_THROWS(gwo_optimize(cfg, f, 0));
    cfg.iterations = 1;
    cfg.upper = {-1.0};
    CHECK_THROWS(gwo_optimize(cfg, f, 0));
    cfg.upper.clear();
    cfg.lower.clear();
    CHECK_THROWS(gwo_optimize(cfg, f, 0));
}

TEST_CASE("non-finite and constant objectives stay well behaved") {
    GwoConfig cfg;
    cfg.wolves = 4;
    cfg.iterations = 3;
    cfg.lower = {0.0};
    cfg.upper = {1.0};

    const Objective nan_f = [](const std::vector<double>&) {
        return std::numeric_limits<double>::quiet_NaN();
    };
    const auto r = gwo_optimize(cfg, nan_f, 1);
    CHECK(r.best.size() == 1);  // best position stays a real point
    CHECK(std::isinf(r.best_fitness));

    const Objective flat = [](const std::vector<double>&) { return 4.2; };
    const auto rf = gwo_optimize(cfg, flat, 1);
    CHECK(rf.best_fitness == doctest::Approx(4.2));
    for (double h : rf.history) CHECK(h == doctest::Approx(4.2));
}

TEST_CASE("lr triple decode sorts before exponentiating") {
    const auto t = decode_lr_triple({-3.0, -5.0, -4.0});
    CHECK(t[0] == doctest::Approx(1e-5));
    CHECK(t[1] == doctest::Approx(1e-4));
    CHECK(t[2] == doctest::Approx(1e-3));
    CHECK(t[0] <= t[1]);
    CHECK(t[1] <= t[2]);
    CHECK_THROWS(decode_lr_triple({-3.0, -4.0}));
}

TEST_CASE("lr search tunes the triple against a proxy run") {
    const auto mcfg = testutil::micro_model();
    const auto init = nn::ModelState::init(mcfg, 2);
    const auto faces = testutil::micro_faces(12, 3, 14);
    const std::vector<ImageSample> train(faces.begin(), faces.begin() + 8);
    const std::vector<ImageSample> val(faces.begin() + 8, faces.end());

    supervised::SupervisedConfig base;
    base.epochs = 50;
    base.batch_size = 4;
    base.auto_extend_small_labels = false;

    LrSearchConfig scfg;
    scfg.wolves = 4;
    scfg.iterations = 2;
    scfg.proxy_epochs = 1;
    const auto res = hpo::lr_search(scfg, base, init, train, val, data::StoredBoxes{}, 5);

    CHECK(res.tuned);
    CHECK(res.search.evaluations == 4 * 2);
    CHECK(res.config.min_lr <= res.config.warmup_init_lr);
    CHECK(res.config.warmup_init_lr <= res.config.base_lr);
    CHECK(res.config.min_lr > 0.0);
    // the proxy never changes the long-run shape of the returned config
    CHECK(res.config.epochs == 50);
    CHECK(res.proxy_best_acc >= 0.0);
    CHECK(res.proxy_best_acc <= 1.0);

    // proxy_epochs = 0 skips the search and returns the base untouched
    scfg.proxy_epochs = 0;
    const auto skip = hpo::lr_search(scfg, base, init, train, val, data::StoredBoxes{}, 5);
    CHECK(!skip.tuned);
    CHECK(skip.config.base_lr == base.base_lr);
    CHECK(skip.search.evaluations == 0);

    scfg.proxy_epochs = 1;
    CHECK_THROWS(hpo::lr_search(scfg, base, init, train, {}, data::StoredBoxes{}, 5));
}
