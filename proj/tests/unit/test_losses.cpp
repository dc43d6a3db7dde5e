#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ssfer/model.hpp"
#include "ssfer/optimizer.hpp"
#include "ssfer/pretrain.hpp"
#include "ssfer/rng.hpp"
#include "ssfer/supervised.hpp"

using namespace ssfer;
using namespace ssfer::supervised;

TEST_CASE("cross entropy closed forms") {
    // uniform logits, any target distribution: loss = log(C)
    Vec z = Vec::Constant(5, 1.3);
    CHECK(soft_ce(z, one_hot(2, 5)) == doctest::Approx(std::log(5.0)).epsilon(1e-12));

    Vec z2 = Vec::Zero(2);
    CHECK(soft_ce(z2, one_hot(0, 2)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // perfect prediction drives the loss toward zero
    Vec sharp(3);
    sharp << 30.0, 0.0, 0.0;
    CHECK(soft_ce(sharp, one_hot(0, 3)) < 1e-10);
}

TEST_CASE("cross entropy gradient is softmax minus target") {
    Vec z(4);
    z << 0.3, -1.2, 2.0, 0.0;
    const Vec t = one_hot(2, 4);
    const Vec g = soft_ce_grad(z, t);
    const Vec expect = nn::softmax(z) - t;
    for (int i = 0; i < 4; ++i) CHECK(g[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    CHECK(std::abs(g.sum()) < 1e-12);
}

TEST_CASE("hard label loss equals soft loss on a one-hot target") {
    Vec z(3);
    z << 0.5, 1.5, -0.7;
    for (int y = 0; y < 3; ++y)
        CHECK(hard_ce(z, y) == doctest::Approx(soft_ce(z, one_hot(y, 3))).epsilon(1e-14));
}

TEST_CASE("one_hot layout") {
    const Vec v = one_hot(1, 4);
    CHECK(v.size() == 4);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 1.0);
    CHECK(v.sum() == 1.0);
}

TEST_CASE("mixing loss variants place kappa as specified") {
    const double k = 0.3;
    auto [v1, r1] = facemix_weights("L1", k);
    CHECK(v1 == doctest::Approx(0.7));
    CHECK(r1 == 1.0);
    auto [v2, r2] = facemix_weights("L2", k);
    CHECK(v2 == 1.0);
    CHECK(r2 == doctest::Approx(0.7));
    auto [v3, r3] = facemix_weights("L3", k);
    CHECK(v3 == doctest::Approx(0.3));
    CHECK(r3 == 1.0);
    auto [v4, r4] = facemix_weights("L4", k);
    CHECK(v4 == 1.0);
    CHECK(r4 == doctest::Approx(0.3));

    CHECK_THROWS(facemix_weights("L5", k));
    CHECK_THROWS(facemix_weights("L4", -0.1));
    CHECK_THROWS(facemix_weights("L4", 1.1));
}

TEST_CASE("mixing loss worked values") {
    // L1 at kappa=1 keeps only the real-image terms
    CHECK(facemix_loss(0.7, 0.4, 0.5, 1.0, "L1") == doctest::Approx(0.9).epsilon(1e-12));
    // L4: l_v + kappa * (l_i + l_j)
    CHECK(facemix_loss(1.0, 0.4, 0.2, 0.25, "L4") == doctest::Approx(1.15).epsilon(1e-12));
    // kappa=0 under L4 collapses to the virtual term alone (the mixup limit)
    CHECK(facemix_loss(0.83, 0.4, 0.2, 0.0, "L4") == doctest::Approx(0.83).epsilon(1e-12));
    // L4 grows with kappa whenever the real terms are positive
    double prev = -1.0;
    for (double k = 0.0; k <= 1.0; k += 0.25) {
        const double cur = facemix_loss(0.5, 0.3, 0.2, k, "L4");
        CHECK(cur > prev);
        prev = cur;
    }
}

TEST_CASE("pair loss obeys its lambda/kappa contract") {
    const auto cfg = testutil::micro_model();
    const auto s = nn::ModelState::init(cfg, 3);
    const auto faces = testutil::micro_faces(2, 3, 11);
    const Mat pi = nn::patchify(faces[0].pixels, cfg.patch_size);
    const Mat pj = nn::patchify(faces[1].pixels, cfg.patch_size);

    CHECK_THROWS(facemix_pair_loss(s, pi, 0, pj, 1, -0.2, 0.5, "L4", nullptr));
    CHECK_THROWS(facemix_pair_loss(s, pi, 0, pj, 1, 0.5, 0.5, "bogus", nullptr));

    // lambda=1 with kappa=0 is plain CE on image i
    nn::VitCache cache;
    const double direct = hard_ce(nn::classify_forward(s, pi, cache), 0);
    const double viaMix = facemix_pair_loss(s, pi, 0, pj, 1, 1.0, 0.0, "L4", nullptr);
    CHECK(viaMix == doctest::Approx(direct).epsilon(1e-12));

    // decomposes as w_v * l_v + w_r * (l_i + l_j)
    const double lam = 0.4, kap = 0.35;
    const Mat mixed = lam * pi + (1.0 - lam) * pj;
    const Vec ymix = lam * one_hot(0, 3) + (1.0 - lam) * one_hot(1, 3);
    const double lv = soft_ce(nn::classify_forward(s, mixed, cache), ymix);
    const double li = hard_ce(nn::classify_forward(s, pi, cache), 0);
    const double lj = hard_ce(nn::classify_forward(s, pj, cache), 1);
    const double got = facemix_pair_loss(s, pi, 0, pj, 1, lam, kap, "L2", nullptr);
    CHECK(got == doctest::Approx(1.0 * lv + (1.0 - kap) * (li + lj)).epsilon(1e-10));
}

TEST_CASE("epoch extension for small labeled sets") {
    SupervisedConfig cfg;
    cfg.epochs = 100;
    cfg.auto_extend_small_labels = true;
    cfg.small_label_threshold = 500;
    cfg.extend_factor = 10;
    CHECK(effective_epochs(cfg, 499) == 1000);
    CHECK(effective_epochs(cfg, 500) == 100);
    CHECK(effective_epochs(cfg, 5000) == 100);
    cfg.auto_extend_small_labels = false;
    CHECK(effective_epochs(cfg, 10) == 100);
}

TEST_CASE("reconstruction targets normalize per patch") {
    Mat patches(3, 8);
    Rng rng(5);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 8; ++c) patches(r, c) = rng.uniform(0.0, 1.0);
    patches.row(2).setConstant(0.4);  // flat patch

    const Mat raw = pretrain::recon_targets(patches, false);
    CHECK((raw - patches).norm() == 0.0);

    const Mat norm = pretrain::recon_targets(patches, true);
    for (int r = 0; r < 2; ++r) {
        const double mu = norm.row(r).mean();
        const double var = (norm.row(r).array() - mu).square().sum() / 8.0;
        CHECK(std::abs(mu) < 1e-9);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
    // a constant patch maps to zeros instead of dividing by zero
    CHECK(norm.row(2).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("reconstruction loss counts masked rows only") {
    Mat target = Mat::Zero(4, 6);
    Mat pred = Mat::Zero(4, 6);
    pred.row(1).setConstant(1.0);  // masked, contributes
    pred.row(2).setConstant(9.0);  // visible, ignored
    nn::MaskPattern mask;
    mask.n_patches = 4;
    mask.masked = {1, 3};
    mask.visible = {0, 2};

    // (6 * 1^2 + 0) / (2 * 6)
    CHECK(pretrain::recon_loss(pred, target, mask) == doctest::Approx(0.5).epsilon(1e-12));

    const Mat g = pretrain::recon_loss_grad(pred, target, mask);
    CHECK(g.row(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.row(2).cwiseAbs().maxCoeff() == 0.0);
    // 2 * (1 - 0) / (2 * 6)
    CHECK(g(1, 0) == doctest::Approx(2.0 / 12.0).epsilon(1e-12));
    CHECK(g(3, 0) == 0.0);

    nn::MaskPattern none;
    none.n_patches = 4;
    CHECK_THROWS(pretrain::recon_loss(pred, target, none));
    Mat bad = Mat::Zero(3, 6);
    CHECK_THROWS(pretrain::recon_loss(bad, target, mask));
}

TEST_CASE("learning rate schedule endpoints") {
    nn::LrSchedule sched{1e-3, 1e-5, 1e-4, 10, 110};
    // warmup ends exactly at base_lr, then cosine starts from base_lr
    CHECK(sched.at(9) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(sched.at(10) == doctest::Approx(1e-3).epsilon(1e-12));
    // first step already moves a warmup increment up from the init lr
    CHECK(sched.at(0) == doctest::Approx(1e-4 + (1e-3 - 1e-4) / 10.0).epsilon(1e-12));
    // cosine midpoint is the average of base and min
    CHECK(sched.at(60) == doctest::Approx(0.5 * (1e-3 + 1e-5)).epsilon(1e-9));
    // decreasing after warmup, never below min
    for (int s = 11; s < 110; ++s) {
        CHECK(sched.at(s) <= sched.at(s - 1) + 1e-15);
        CHECK(sched.at(s) >= 1e-5 - 1e-15);
    }
    CHECK_THROWS(sched.at(-1));
    CHECK_THROWS(sched.at(110));

    nn::LrSchedule flat{2e-4, 0.0, 0.0, 0, 10};
    CHECK(flat.at(0) == doctest::Approx(2e-4).epsilon(1e-12));

    nn::LrSchedule allwarm{1e-3, 0.0, 1e-5, 10, 10};
    CHECK(allwarm.at(9) == doctest::Approx(1e-3).epsilon(1e-12));
}
