#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "ssfer/checkpoint.hpp"
#include "ssfer/model.hpp"

using namespace ssfer;
using namespace ssfer::nn;

TEST_CASE("patchify layout oracle") {
    // 4x4 single-channel image, 2x2 patches: rows are raster patches,
    // columns run (dy, dx, channel)
    Image img(4, 4, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) img.at(y, x, 0) = static_cast<float>(10 * y + x);
    const Mat p = patchify(img, 2);
    REQUIRE(p.rows() == 4);
    REQUIRE(p.cols() == 4);
    // top-left patch: pixels (0,0),(0,1),(1,0),(1,1)
    CHECK(p(0, 0) == 0.0);
    CHECK(p(0, 1) == 1.0);
    CHECK(p(0, 2) == 10.0);
    CHECK(p(0, 3) == 11.0);
    // bottom-right patch starts at (2,2)
    CHECK(p(3, 0) == 22.0);
    CHECK(p(3, 3) == 33.0);
}

TEST_CASE("unpatchify inverts patchify") {
    const auto img = testutil::micro_faces(1, 3, 1)[0].pixels;
    const Mat p = patchify(img, 4);
    const Image back = unpatchify(p, 4, 16, 3);
    REQUIRE(back.same_shape(img));
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-7));
}

TEST_CASE("patchify validates divisibility") {
    Image img(15, 15, 3, 0.0f);
    CHECK_THROWS_AS(patchify(img, 4), Error);
}

TEST_CASE("mask sampling is exact and disjoint") {
    for (const double ratio : {0.5, 0.75, 0.9}) {
        const MaskPattern m = sample_mask(64, ratio, 11);
        CHECK(m.n_patches == 64);
        CHECK(static_cast<int>(m.masked.size()) ==
              static_cast<int>(std::floor(ratio * 64)));
        CHECK(m.masked.size() + m.visible.size() == 64);
        std::set<int> all(m.masked.begin(), m.masked.end());
        all.insert(m.visible.begin(), m.visible.end());
        CHECK(all.size() == 64);
        CHECK(std::is_sorted(m.masked.begin(), m.masked.end()));
        CHECK(std::is_sorted(m.visible.begin(), m.visible.end()));
    }
    const MaskPattern a = sample_mask(64, 0.75, 3);
    const MaskPattern b = sample_mask(64, 0.75, 3);
    CHECK(a.masked == b.masked);
    const MaskPattern c = sample_mask(64, 0.75, 4);
    CHECK(a.masked != c.masked);
}

TEST_CASE("state init is deterministic and finite") {
    const auto cfg = testutil::micro_model();
    const ModelState a = ModelState::init(cfg, 5);
    const ModelState b = ModelState::init(cfg, 5);
    CHECK(testutil::states_equal(a, b));
    const ModelState c = ModelState::init(cfg, 6);
    CHECK_FALSE(testutil::states_equal(a, c));
    CHECK(a.all_finite());
    CHECK(a.scalar_count() > 0);

    const ModelState z = ModelState::zeros_like(cfg);
    for (int i = 0; i < z.tensor_count(); ++i) CHECK(z.param(i).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("classifier forward shapes and softmax") {
    const auto cfg = testutil::micro_model(4);
    const ModelState s = ModelState::init(cfg, 1);
    const auto img = testutil::micro_faces(1, 4, 2)[0].pixels;
    const Vec logits = classify(s, img);
    REQUIRE(logits.size() == 4);
    const Vec p = softmax(logits);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.minCoeff() > 0.0);

    // shifting logits by a constant leaves softmax unchanged
    const Vec p2 = softmax(Vec(logits.array() + 100.0));
    for (int i = 0; i < 4; ++i) CHECK(p(i) == doctest::Approx(p2(i)).epsilon(1e-9));
}

TEST_CASE("encoder output geometry") {
    const auto cfg = testutil::micro_model();
    const ModelState s = ModelState::init(cfg, 2);
    const auto img = testutil::micro_faces(1, 3, 3)[0].pixels;
    const Mat patches = patchify(img, cfg.patch_size);
    CHECK(patches.rows() == 16);

    VitCache cache;
    const Vec logits = classify_forward(s, img, cache);
    CHECK(logits.size() == cfg.class_count);
}

TEST_CASE("reconstruction round shape") {
    const auto cfg = testutil::micro_model();
    const ModelState s = ModelState::init(cfg, 3);
    const auto img = testutil::micro_faces(1, 3, 4)[0].pixels;
    const MaskPattern mask = sample_mask(16, cfg.mask_ratio, 7);
    VitCache cache;
    const Mat pred = mae_forward(s, patchify(img, cfg.patch_size), mask, cache);
    CHECK(pred.rows() == 16);
    CHECK(pred.cols() == 4 * 4 * 3);
}

TEST_CASE("parameter and flop accounting") {
    // the published table for the 224px/16 base model
    const auto base = count_params_flops(ModelConfig::base224());
    CHECK(std::abs(base.params - 85.7e6) / 85.7e6 < 0.01);
    CHECK(std::abs(base.flops - 16.9e9) / 16.9e9 < 0.01);

    const auto tiny = count_params_flops(ModelConfig::tiny());
    CHECK(tiny.params > 0);
    CHECK(tiny.flops > tiny.params);  // more than one MAC per weight

    // scalar_count of a full state exceeds the classifier-only count
    // (decoder weights are excluded from the accounting)
    const auto cfg = testutil::micro_model();
    const ModelState s = ModelState::init(cfg, 1);
    CHECK(s.scalar_count() > count_params_flops(cfg).params);
}

TEST_CASE("model config equality and json round-trip") {
    const auto cfg = testutil::micro_model();
    CHECK(cfg == cfg);
    auto other = cfg;
    other.embed_dim = 32;
    CHECK_FALSE(cfg == other);

    const auto j = model_config_to_json(cfg);
    const auto back = model_config_from_json(j, "test");
    CHECK(back == cfg);
    CHECK(model_config_hash(cfg) == model_config_hash(back));
    CHECK(model_config_hash(cfg) != model_config_hash(other));
}
