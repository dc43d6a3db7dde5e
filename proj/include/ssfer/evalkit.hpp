#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssfer/image.hpp"
#include "ssfer/model.hpp"

namespace ssfer::evalkit {

struct MetricsReport {
    double accuracy = 0.0;
    int total = 0;
    std::vector<std::vector<int>> confusion;  // rows = true, cols = predicted
    std::vector<double> per_class_accuracy;   // diagonal / row sum, 0 for empty rows
};

int predict(const nn::ModelState& s, const Image& img, Vec* probs = nullptr);

MetricsReport evaluate(const nn::ModelState& s, const std::vector<ImageSample>& samples);

inline constexpr double kSaliencyThreshold = 0.3;

// per-pixel relevance in [0,1], max-normalized; pixels above the threshold
// form the focused region
struct SaliencyMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;  // row-major
    double threshold = kSaliencyThreshold;

    double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
    std::vector<uint8_t> focused_mask() const;
};

// channel-mean |dCE/dpixel| of a precomputed input gradient
SaliencyMap gradient_saliency(const Image& input_grad);

// CE gradient at the sample's own label, then gradient_saliency
SaliencyMap saliency(const nn::ModelState& s, const ImageSample& sample);

std::vector<uint8_t> threshold_mask(const SaliencyMap& m, double threshold);

// pluggable region source for the attack study; the default derives the
// focused region from the model's own input gradient
class SaliencyProvider {
public:
    virtual ~SaliencyProvider() = default;
    virtual SaliencyMap saliency(const nn::ModelState& s, const ImageSample& sample) const = 0;
};

class GradientSaliency : public SaliencyProvider {
public:
    SaliencyMap saliency(const nn::ModelState& s, const ImageSample& sample) const override;
};

// x' = clip01(x + eps * sign(g)) on masked pixels, untouched copy elsewhere
Image fgsm_attack(const Image& x, const Image& grad, double eps,
                  const std::vector<uint8_t>& region_mask);

// same, deriving the gradient from the model at the sample's own label
Image fgsm_attack(const nn::ModelState& s, const ImageSample& sample, double eps,
                  const std::vector<uint8_t>& region_mask);

struct AttackResult {
    std::vector<double> epsilons;
    std::vector<double> focused_acc;    // perturbation confined to salient pixels
    std::vector<double> unfocused_acc;  // perturbation on the complement
};

AttackResult attack_experiment(const nn::ModelState& s, const std::vector<ImageSample>& samples,
                               const std::vector<double>& epsilons,
                               const SaliencyProvider* provider = nullptr,
                               double threshold = kSaliencyThreshold);

std::vector<double> default_attack_epsilons();

}  // namespace ssfer::evalkit
