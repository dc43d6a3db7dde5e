#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

#include "helpers.hpp"
#include "ssfer/checkpoint.hpp"
#include "ssfer/model.hpp"

using namespace ssfer;
using namespace ssfer::nn;
namespace fs = std::filesystem;

TEST_CASE("checkpoint round trip preserves tensors and meta") {
    const auto dir = testutil::temp_dir("ckpt_rt");
    const auto cfg = testutil::micro_model();
    const ModelState s = ModelState::init(cfg, 77);

    CheckpointMeta meta;
    meta.stage = "supervised";
    meta.epoch = 7;
    meta.metrics = {{"acc", 0.625}, {"loss", 1.25}};

    const std::string path = save_checkpoint(s, (dir / "ck").string(), meta);
    CHECK(path == (dir / "ck.json").string());
    CHECK(fs::exists(dir / "ck.bin"));

    CheckpointMeta back;
    const ModelState loaded = load_checkpoint(path, &back);
    CHECK(back.stage == "supervised");
    CHECK(back.epoch == 7);
    CHECK(back.metrics.at("acc") == doctest::Approx(0.625));
    CHECK(back.metrics.at("loss") == doctest::Approx(1.25));

    REQUIRE(loaded.tensor_count() == s.tensor_count());
    // the blob stores float32, so values agree to single precision
    for (int i = 0; i < s.tensor_count(); ++i) {
        const Mat& a = s.param(i);
        const Mat& b = loaded.param(i);
        REQUIRE(a.rows() == b.rows());
        REQUIRE(a.cols() == b.cols());
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("save load save is byte identical") {
    const auto dir = testutil::temp_dir("ckpt_bytes");
    const auto cfg = testutil::micro_model();
    const ModelState s = ModelState::init(cfg, 5);
    CheckpointMeta meta;
    meta.stage = "pretrain";
    meta.epoch = 3;
    meta.metrics = {{"loss", 0.5}};

    const std::string p1 = save_checkpoint(s, (dir / "a").string(), meta);
    const ModelState loaded = load_checkpoint(p1);
    const std::string p2 = save_checkpoint(loaded, (dir / "b").string(), meta);

    // manifests differ only in the blob filename they point at
    auto m1 = nlohmann::json::parse(testutil::read_file(p1));
    auto m2 = nlohmann::json::parse(testutil::read_file(p2));
    CHECK(m1.at("blob") == "a.bin");
    CHECK(m2.at("blob") == "b.bin");
    m1.erase("blob");
    m2.erase("blob");
    CHECK(m1 == m2);
    CHECK(testutil::read_file((dir / "a.bin").string()) ==
          testutil::read_file((dir / "b.bin").string()));
}

TEST_CASE("chaining refuses a checkpoint for a different model") {
    const auto dir = testutil::temp_dir("ckpt_hash");
    const auto cfg = testutil::micro_model();
    const ModelState s = ModelState::init(cfg, 1);
    const std::string path = save_checkpoint(s, (dir / "ck").string(), {});

    CHECK_NOTHROW(load_checkpoint_expect(path, cfg));

    auto other = cfg;
    other.class_count = 5;
    bool threw = false;
    try {
        load_checkpoint_expect(path, other);
    } catch (const Error& e) {
        threw = true;
        const std::string msg = e.what();
        // the error names both config hashes so the mismatch is diagnosable
        CHECK(msg.find(model_config_hash(cfg)) != std::string::npos);
        CHECK(msg.find(model_config_hash(other)) != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("loader rejects missing or damaged inputs") {
    const auto dir = testutil::temp_dir("ckpt_bad");
    CHECK_THROWS(load_checkpoint((dir / "nope.json").string()));

    const auto cfg = testutil::micro_model();
    const ModelState s = ModelState::init(cfg, 2);
    const std::string path = save_checkpoint(s, (dir / "ck").string(), {});

    // truncated blob
    {
        std::ofstream trunc(dir / "ck.bin", std::ios::binary | std::ios::trunc);
        trunc << "xx";
    }
    CHECK_THROWS(load_checkpoint(path));

    // garbage manifest
    {
        std::ofstream bad(dir / "junk.json");
        bad << "{not json";
    }
    CHECK_THROWS(load_checkpoint((dir / "junk.json").string()));
}

TEST_CASE("config hash is stable and config sensitive") {
    const auto cfg = testutil::micro_model();
    const std::string h = model_config_hash(cfg);
    CHECK(h == model_config_hash(cfg));
    CHECK(!h.empty());
    auto other = cfg;
    other.depth += 1;
    CHECK(h != model_config_hash(other));
}
