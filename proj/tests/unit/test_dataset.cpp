#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "helpers.hpp"
#include "ssfer/dataset.hpp"

using namespace ssfer;
using namespace ssfer::data;

namespace {

std::map<int, int> label_counts(const std::vector<ImageSample>& v) {
    std::map<int, int> m;
    for (const auto& s : v)
        if (s.label) ++m[*s.label];
    return m;
}

std::set<std::string> ids_of(const std::vector<ImageSample>& v) {
    std::set<std::string> out;
    for (const auto& s : v) out.insert(s.id);
    return out;
}

}  // namespace

TEST_CASE("per-class subsampling takes the exact budget") {
    const auto samples = testutil::micro_faces(60, 3, 1);
    const auto split = subsample_labels(samples, {LabelBudget::Kind::per_class, 5}, 7);
    const auto counts = label_counts(split.labeled);
    REQUIRE(counts.size() == 3);
    for (const auto& [cls, n] : counts) CHECK(n == 5);
    CHECK(split.labeled.size() == 15);
    CHECK(split.unlabeled.size() == 45);
    for (const auto& s : split.unlabeled) CHECK_FALSE(s.label.has_value());

    // labeled and unlabeled partition the input
    auto all_ids = ids_of(samples);
    auto got = ids_of(split.labeled);
    for (const auto& id : ids_of(split.unlabeled)) CHECK(got.insert(id).second);
    CHECK(got == all_ids);
}

TEST_CASE("fraction subsampling is stratified") {
    const auto samples = testutil::micro_faces(90, 3, 2);
    const auto split = subsample_labels(samples, {LabelBudget::Kind::fraction, 0.2}, 5);
    const auto counts = label_counts(split.labeled);
    for (const auto& [cls, n] : counts) CHECK(n == 6);  // 20% of 30 per class
    CHECK(split.labeled.size() == 18);
}

TEST_CASE("subsampling is deterministic and seed-sensitive") {
    const auto samples = testutil::micro_faces(60, 3, 3);
    const auto a = subsample_labels(samples, {LabelBudget::Kind::fraction, 0.3}, 11);
    const auto b = subsample_labels(samples, {LabelBudget::Kind::fraction, 0.3}, 11);
    const auto c = subsample_labels(samples, {LabelBudget::Kind::fraction, 0.3}, 12);
    CHECK(ids_of(a.labeled) == ids_of(b.labeled));
    CHECK(ids_of(a.labeled) != ids_of(c.labeled));
}

TEST_CASE("label noise flips the documented count") {
    const auto samples = testutil::micro_faces(60, 3, 4);
    auto split = subsample_labels(samples, {LabelBudget::Kind::fraction, 1.0}, 1);
    REQUIRE(split.labeled.size() == 60);

    const auto noisy = inject_label_noise(split, 0.25, 21);
    REQUIRE(noisy.labeled.size() == 60);
    int flipped = 0;
    for (size_t i = 0; i < noisy.labeled.size(); ++i) {
        CHECK(noisy.labeled[i].id == split.labeled[i].id);
        REQUIRE(noisy.labeled[i].label.has_value());
        const int before = *split.labeled[i].label;
        const int after = *noisy.labeled[i].label;
        CHECK(after >= 0);
        CHECK(after < 3);
        if (after != before) ++flipped;
    }
    CHECK(flipped == 15);  // round(0.25 * 60)

    const auto clean = inject_label_noise(split, 0.0, 21);
    for (size_t i = 0; i < clean.labeled.size(); ++i)
        CHECK(*clean.labeled[i].label == *split.labeled[i].label);
}

TEST_CASE("kfold partitions the data") {
    const auto samples = testutil::micro_faces(53, 3, 5);
    const auto folds = kfold_split(samples, 5, 31);
    REQUIRE(folds.size() == 5);
    std::set<std::string> seen;
    for (const auto& f : folds) {
        CHECK(f.train.size() + f.validation.size() == 53);
        // validation sets are disjoint across folds
        for (const auto& s : f.validation) CHECK(seen.insert(s.id).second);
        // no leakage inside a fold
        auto tr = ids_of(f.train);
        for (const auto& s : f.validation) CHECK(tr.count(s.id) == 0);
        CHECK(f.validation.size() >= 53 / 5);
        CHECK(f.validation.size() <= 53 / 5 + 1);
    }
    CHECK(seen.size() == 53);
    CHECK_THROWS_AS(kfold_split(samples, 1, 0), Error);
    CHECK_THROWS_AS(kfold_split(samples, 60, 0), Error);
}

TEST_CASE("holdout split is stratified and sized") {
    const auto samples = testutil::micro_faces(100, 4, 6);
    const auto [rest, held] = split_holdout(samples, 0.2, 4, 17);
    CHECK(rest.size() + held.size() == 100);
    CHECK(held.size() == 20);
    const auto counts = label_counts(held);
    for (const auto& [cls, n] : counts) CHECK(n == 5);
    auto rest_ids = ids_of(rest);
    for (const auto& s : held) CHECK(rest_ids.count(s.id) == 0);
}

TEST_CASE("box provider variants") {
    auto samples = testutil::micro_faces(4, 3, 7);
    const ImageSample& s = samples[0];

    const BoxProvider stored{StoredBoxes{}};
    const FaceBox b = face_box(stored, s);
    CHECK(b.x0 == s.face_box->x0);

    const BoxProvider full{FullImageBoxes{}};
    const FaceBox f = face_box(full, s);
    CHECK(f.x0 == 0);
    CHECK(f.y0 == 0);
    CHECK(f.x1 == s.pixels.width);
    CHECK(f.y1 == s.pixels.height);

    ImageSample no_box = s;
    no_box.face_box.reset();
    CHECK_THROWS_AS(face_box(stored, no_box), Error);

    SidecarBoxes sc;
    sc.boxes[s.id] = FaceBox{1, 2, 3, 4};
    const BoxProvider side{sc};
    const FaceBox sb = face_box(side, s);
    CHECK(sb.y0 == 2);
    // unknown ids fall back to the full frame
    const FaceBox fb = face_box(side, samples[1]);
    CHECK(fb.x1 == samples[1].pixels.width);
}

TEST_CASE("box sidecar round-trip") {
    const std::string dir = testutil::temp_dir("sidecar");
    const auto samples = testutil::micro_faces(6, 3, 8);
    const std::string path = dir + "/boxes.txt";
    save_box_sidecar(path, samples);
    const SidecarBoxes sc = load_box_sidecar(path);
    REQUIRE(sc.boxes.size() == 6);
    for (const auto& s : samples) {
        const auto it = sc.boxes.find(s.id);
        REQUIRE(it != sc.boxes.end());
        CHECK(it->second.x0 == doctest::Approx(s.face_box->x0));
        CHECK(it->second.y1 == doctest::Approx(s.face_box->y1));
    }
    CHECK_THROWS_AS(load_box_sidecar(dir + "/missing.txt"), Error);
}

TEST_CASE("manifest round-trip with png files") {
    const std::string dir = testutil::temp_dir("manifest");
    const auto samples = testutil::micro_faces(5, 3, 9);
    const std::string path = dir + "/manifest.json";
    save_manifest(path, samples);
    const auto back = load_manifest(path);
    REQUIRE(back.size() == 5);
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(back[i].id == samples[i].id);
        CHECK(back[i].label == samples[i].label);
        REQUIRE(back[i].face_box.has_value());
        CHECK(back[i].face_box->x1 == doctest::Approx(samples[i].face_box->x1));
        REQUIRE(back[i].pixels.same_shape(samples[i].pixels));
        for (size_t k = 0; k < back[i].pixels.data.size(); ++k)
            CHECK(back[i].pixels.data[k] ==
                  doctest::Approx(samples[i].pixels.data[k]).epsilon(1.0 / 255.0));
    }
}

TEST_CASE("manifest round-trip with inline pixels is exact") {
    const std::string dir = testutil::temp_dir("manifest_inline");
    auto samples = testutil::micro_faces(3, 3, 10);
    samples[1].label.reset();  // unlabeled entries survive
    const std::string path = dir + "/manifest.json";
    save_manifest(path, samples, true);
    const auto back = load_manifest(path);
    REQUIRE(back.size() == 3);
    CHECK_FALSE(back[1].label.has_value());
    for (size_t i = 0; i < samples.size(); ++i)
        CHECK(back[i].pixels.data == samples[i].pixels.data);
}

TEST_CASE("manifest io rejects bad input") {
    const std::string dir = testutil::temp_dir("manifest_bad");
    CHECK_THROWS_AS(load_manifest(dir + "/none.json"), Error);
    {
        std::ofstream out(dir + "/garbage.json");
        out << "{not json";
    }
    CHECK_THROWS_AS(load_manifest(dir + "/garbage.json"), Error);
}
