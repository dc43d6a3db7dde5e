#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "ssfer/dataset.hpp"
#include "ssfer/image.hpp"

namespace ssfer::aug {

enum class PolicyKind { weak, strong };

// weak = random resized crop + horizontal flip
// strong = weak + N randomly chosen heavier ops at fixed magnitude
struct AugmentPolicy {
    PolicyKind kind = PolicyKind::weak;
    double crop_scale_lo = 0.8;
    double crop_scale_hi = 1.0;
    int randaugment_ops = 2;       // strong only
    int randaugment_magnitude = 9;  // 0..10
};

AugmentPolicy weak_policy();
AugmentPolicy strong_policy();

// deterministic for a given (policy, image, seed); RNG draw order is fixed
// and independent of pixel content
Image apply_augment(const AugmentPolicy& policy, const Image& image, uint64_t seed);

// pixel and label mixup: lambda*first + (1-lambda)*second
std::pair<Image, Vec> mix_images(const Image& xi, const Vec& yi, const Image& xj, const Vec& yj,
                                 double lambda);

double sample_lambda(double alpha, uint64_t seed);

// intersection-over-union of two boxes; degenerate boxes are an error
double iou(const FaceBox& a, const FaceBox& b);

enum class KappaMetric { iou, psnr, ssim, fsim };

KappaMetric kappa_metric_from_string(const std::string& name);
std::string to_string(KappaMetric m);

// similarity weight in [0,1]; 0 = images overlap fully / look identical
double kappa(const ImageSample& xi, const ImageSample& xj, KappaMetric metric,
             const data::BoxProvider& provider);

enum class SimilarityMetric { psnr, ssim, fsim };

double image_similarity(SimilarityMetric metric, const Image& xi, const Image& xj);

inline constexpr double kPsnrCap = 50.0;

}  // namespace ssfer::aug
