#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "ssfer/image.hpp"

namespace ssfer::data {

// ------------------------------------------------------------------ synth

struct SynthSpec {
    int n_samples = 0;
    int class_count = 3;
    int image_size = 32;
    double jitter = 0.3;  // in [0,1]
    uint64_t seed = 0;
};

// one generated face plus the expression-region mask (eye + mouth pixels)
struct SynthSample {
    ImageSample sample;
    std::vector<uint8_t> expression_mask;  // height*width, 1 = eye/mouth pixel
};

// background is this exact constant color (lets tests segment trivially)
inline constexpr float kBackground[3] = {0.10f, 0.12f, 0.16f};

std::vector<ImageSample> synth_generate(const SynthSpec& spec);
std::vector<SynthSample> synth_generate_detailed(const SynthSpec& spec);

// ------------------------------------------------------------------ splits

struct DatasetSplit {
    std::vector<ImageSample> labeled;
    std::vector<ImageSample> unlabeled;  // labels stripped
    std::vector<ImageSample> test;
    int class_count = 0;
};

struct LabelBudget {
    enum class Kind { per_class, fraction } kind = Kind::per_class;
    double value = 0;  // count per class, or fraction of the pool
};

// class-stratified label subsampling; the rest of the pool becomes the
// unlabeled set. test stays empty, callers attach their own held-out set.
DatasetSplit subsample_labels(const std::vector<ImageSample>& samples, const LabelBudget& budget,
                              uint64_t seed);

// flips round(ratio*n) labels to a uniformly chosen *different* class
DatasetSplit inject_label_noise(const DatasetSplit& split, double ratio, uint64_t seed);

struct FoldPair {
    std::vector<ImageSample> train;
    std::vector<ImageSample> validation;
};

std::vector<FoldPair> kfold_split(const std::vector<ImageSample>& samples, int k, uint64_t seed);

// stratified split of a pool into (rest, held_out) with |held_out| ~ fraction
std::pair<std::vector<ImageSample>, std::vector<ImageSample>> split_holdout(
    const std::vector<ImageSample>& samples, double fraction, int class_count, uint64_t seed);

// ------------------------------------------------------------- face boxes

struct StoredBoxes {};
struct FullImageBoxes {};
struct SidecarBoxes {
    std::map<std::string, FaceBox> boxes;
};

using BoxProvider = std::variant<StoredBoxes, FullImageBoxes, SidecarBoxes>;

FaceBox face_box(const BoxProvider& provider, const ImageSample& sample);

// "id x0 y0 x1 y1" per line
SidecarBoxes load_box_sidecar(const std::string& path);
void save_box_sidecar(const std::string& path, const std::vector<ImageSample>& samples);

// ------------------------------------------------------------- manifest IO

// JSON array of {id, path|pixels, label?, box?}; paths are PNG files relative
// to the manifest's directory
void save_manifest(const std::string& manifest_path, const std::vector<ImageSample>& samples,
                   bool inline_pixels = false);
std::vector<ImageSample> load_manifest(const std::string& manifest_path);

}  // namespace ssfer::data
