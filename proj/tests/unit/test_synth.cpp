#include <doctest.h>

#include <map>
#include <set>

#include "helpers.hpp"
#include "ssfer/dataset.hpp"

using namespace ssfer;
using namespace ssfer::data;

namespace {

bool is_background(const Image& img, int y, int x) {
    return img.at(y, x, 0) == kBackground[0] && img.at(y, x, 1) == kBackground[1] &&
           img.at(y, x, 2) == kBackground[2];
}

FaceBox scan_box(const Image& img) {
    int x0 = img.width, x1 = -1, y0 = img.height, y1 = -1;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (!is_background(img, y, x)) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
    return FaceBox{static_cast<double>(x0), static_cast<double>(y0),
                   static_cast<double>(x1 + 1), static_cast<double>(y1 + 1)};
}

SynthSpec spec_of(int n, int classes = 3, int size = 32, double jitter = 0.3,
                  uint64_t seed = 0) {
    SynthSpec s;
    s.n_samples = n;
    s.class_count = classes;
    s.image_size = size;
    s.jitter = jitter;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("generation is deterministic") {
    const auto a = synth_generate(spec_of(20));
    const auto b = synth_generate(spec_of(20));
    REQUIRE(a.size() == 20);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].label == b[i].label);
        CHECK(a[i].pixels.data == b[i].pixels.data);
    }
}

TEST_CASE("prefixes of a larger generation match") {
    // per-sample streams, so sample i does not depend on n_samples
    const auto small = synth_generate(spec_of(5));
    const auto big = synth_generate(spec_of(12));
    for (size_t i = 0; i < small.size(); ++i)
        CHECK(small[i].pixels.data == big[i].pixels.data);
}

TEST_CASE("stored face box equals the rendered pixel bound") {
    const auto samples = synth_generate(spec_of(40, 4, 32, 1.0, 9));
    for (const auto& s : samples) {
        REQUIRE(s.face_box.has_value());
        const FaceBox scanned = scan_box(s.pixels);
        CHECK(s.face_box->x0 == scanned.x0);
        CHECK(s.face_box->y0 == scanned.y0);
        CHECK(s.face_box->x1 == scanned.x1);
        CHECK(s.face_box->y1 == scanned.y1);
        CHECK(s.face_box->valid());
        CHECK(s.face_box->x0 >= 0);
        CHECK(s.face_box->y0 >= 0);
        CHECK(s.face_box->x1 <= 32);
        CHECK(s.face_box->y1 <= 32);
    }
}

TEST_CASE("labels are balanced round-robin and ids unique") {
    const auto samples = synth_generate(spec_of(25, 3));
    std::map<int, int> counts;
    std::set<std::string> ids;
    for (const auto& s : samples) {
        REQUIRE(s.label.has_value());
        ++counts[*s.label];
        ids.insert(s.id);
    }
    CHECK(ids.size() == 25);
    CHECK(counts[0] == 9);
    CHECK(counts[1] == 8);
    CHECK(counts[2] == 8);
}

TEST_CASE("zero jitter freezes geometry") {
    const auto samples = synth_generate(spec_of(12, 3, 32, 0.0));
    const FaceBox first = *samples[0].face_box;
    for (const auto& s : samples) {
        CHECK(s.face_box->x0 == first.x0);
        CHECK(s.face_box->y0 == first.y0);
        CHECK(s.face_box->x1 == first.x1);
        CHECK(s.face_box->y1 == first.y1);
    }
    // same class renders identically; different classes differ in the mouth
    CHECK(samples[0].pixels.data == samples[3].pixels.data);
    CHECK(samples[0].pixels.data != samples[1].pixels.data);
}

TEST_CASE("expression mask marks face pixels only") {
    const auto detailed = synth_generate_detailed(spec_of(10));
    for (const auto& d : detailed) {
        const auto& img = d.sample.pixels;
        REQUIRE(d.expression_mask.size() == static_cast<size_t>(img.height) * img.width);
        int marked = 0;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                if (d.expression_mask[static_cast<size_t>(y) * img.width + x]) {
                    ++marked;
                    CHECK_FALSE(is_background(img, y, x));
                    CHECK(x >= d.sample.face_box->x0);
                    CHECK(x < d.sample.face_box->x1);
                    CHECK(y >= d.sample.face_box->y0);
                    CHECK(y < d.sample.face_box->y1);
                }
        CHECK(marked > 0);
    }
}

TEST_CASE("detailed and plain generation agree") {
    const auto plain = synth_generate(spec_of(8));
    const auto detailed = synth_generate_detailed(spec_of(8));
    for (size_t i = 0; i < plain.size(); ++i) {
        CHECK(plain[i].id == detailed[i].sample.id);
        CHECK(plain[i].pixels.data == detailed[i].sample.pixels.data);
    }
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(synth_generate(spec_of(4, 1)), Error);
    CHECK_THROWS_AS(synth_generate(spec_of(4, 3, 8)), Error);
    CHECK_THROWS_AS(synth_generate(spec_of(4, 3, 32, 1.5)), Error);
    CHECK_THROWS_AS(synth_generate(spec_of(-1)), Error);
    CHECK(synth_generate(spec_of(0)).empty());
}

TEST_CASE("pixels stay in unit range") {
    const auto samples = synth_generate(spec_of(10, 3, 32, 1.0, 4));
    for (const auto& s : samples)
        for (float v : s.pixels.data) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
}
