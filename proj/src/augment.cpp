#include "ssfer/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "ssfer/rng.hpp"

namespace ssfer::aug {

namespace {

constexpr double kGeomFill = 0.5;

Image random_resized_crop(const Image& img, double scale_lo, double scale_hi, Rng& rng) {
    const double area = rng.uniform(scale_lo, scale_hi);
    const double side = std::sqrt(area);
    int ch = static_cast<int>(std::lround(img.height * side));
    int cw = static_cast<int>(std::lround(img.width * side));
    ch = std::clamp(ch, 1, img.height);
    cw = std::clamp(cw, 1, img.width);
    const int y0 = static_cast<int>(rng.uniform_index(img.height - ch + 1));
    const int x0 = static_cast<int>(rng.uniform_index(img.width - cw + 1));
    return resize_bilinear(crop(img, y0, x0, ch, cw), img.height, img.width);
}

enum class HeavyOp {
    rotate,
    translate_x,
    translate_y,
    shear_x,
    shear_y,
    brightness,
    contrast,
    invert_blend,
    posterize,
    count
};

Image apply_heavy(const Image& img, HeavyOp op, double level, double sign) {
    switch (op) {
        case HeavyOp::rotate: {
            const double a = sign * level * 30.0 * std::numbers::pi / 180.0;
            const double c = std::cos(a), s = std::sin(a);
            const double m[4] = {c, -s, s, c};
            return affine_warp(img, m, 0.0, 0.0, kGeomFill);
        }
        case HeavyOp::translate_x: {
            const double m[4] = {1, 0, 0, 1};
            return affine_warp(img, m, 0.0, sign * level * 0.3 * img.width, kGeomFill);
        }
        case HeavyOp::translate_y: {
            const double m[4] = {1, 0, 0, 1};
            return affine_warp(img, m, sign * level * 0.3 * img.height, 0.0, kGeomFill);
        }
        case HeavyOp::shear_x: {
            const double m[4] = {1, 0, -sign * level * 0.3, 1};
            return affine_warp(img, m, 0.0, 0.0, kGeomFill);
        }
        case HeavyOp::shear_y: {
            const double m[4] = {1, -sign * level * 0.3, 0, 1};
            return affine_warp(img, m, 0.0, 0.0, kGeomFill);
        }
        case HeavyOp::brightness: {
            Image out = img;
            const float f = static_cast<float>(1.0 + sign * level * 0.5);
            for (float& v : out.data) v *= f;
            return out;
        }
        case HeavyOp::contrast: {
            Image out = img;
            double mean = 0.0;
            for (float v : img.data) mean += v;
            mean /= static_cast<double>(img.data.size());
            const double f = 1.0 + sign * level * 0.5;
            for (float& v : out.data)
                v = static_cast<float>(mean + (static_cast<double>(v) - mean) * f);
            return out;
        }
        case HeavyOp::invert_blend: {
            Image out = img;
            const float w = static_cast<float>(0.5 * level);
            for (float& v : out.data) v = (1.0f - w) * v + w * (1.0f - v);
            return out;
        }
        case HeavyOp::posterize: {
            Image out = img;
            const int levels = std::max(2, 8 - static_cast<int>(std::lround(level * 6.0)));
            for (float& v : out.data)
                v = std::round(clamp01(v) * (levels - 1)) / static_cast<float>(levels - 1);
            return out;
        }
        default:
            fail("apply_augment: unreachable op");
    }
}

}  // namespace

AugmentPolicy weak_policy() {
    AugmentPolicy p;
    p.kind = PolicyKind::weak;
    return p;
}

AugmentPolicy strong_policy() {
    AugmentPolicy p;
    p.kind = PolicyKind::strong;
    return p;
}

Image apply_augment(const AugmentPolicy& policy, const Image& image, uint64_t seed) {
    check(image.height > 0 && image.width > 0, "apply_augment: empty image");
    check(policy.crop_scale_lo > 0.0 && policy.crop_scale_lo <= policy.crop_scale_hi &&
              policy.crop_scale_hi <= 1.0,
          "apply_augment: crop scale range must satisfy 0 < lo <= hi <= 1");
    check(policy.randaugment_magnitude >= 0 && policy.randaugment_magnitude <= 10,
          "apply_augment: magnitude must be in [0,10]");
    check(policy.randaugment_ops >= 0, "apply_augment: negative op count");

    Rng rng(seed);
    Image out = random_resized_crop(image, policy.crop_scale_lo, policy.crop_scale_hi, rng);
    if (rng.bernoulli(0.5)) out = hflip(out);
    clip01(out);

    if (policy.kind == PolicyKind::strong) {
        const double level = policy.randaugment_magnitude / 10.0;
        for (int k = 0; k < policy.randaugment_ops; ++k) {
            // two draws per op regardless of which op lands, so the stream
            // layout is fixed
            const auto op = static_cast<HeavyOp>(
                rng.uniform_index(static_cast<uint64_t>(HeavyOp::count)));
            const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
            out = apply_heavy(out, op, level, sign);
            clip01(out);
        }
    }
    return out;
}

std::pair<Image, Vec> mix_images(const Image& xi, const Vec& yi, const Image& xj, const Vec& yj,
                                 double lambda) {
    check(xi.same_shape(xj), "mix_images: image shape mismatch");
    check(yi.size() == yj.size() && yi.size() > 0, "mix_images: label shape mismatch");
    check(lambda >= 0.0 && lambda <= 1.0, "mix_images: lambda must be in [0,1]");
    Image img = xi;
    for (size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = static_cast<float>(lambda * static_cast<double>(xi.data[i]) +
                                         (1.0 - lambda) * static_cast<double>(xj.data[i]));
    Vec y = lambda * yi + (1.0 - lambda) * yj;
    return {std::move(img), std::move(y)};
}

double sample_lambda(double alpha, uint64_t seed) {
    check(alpha > 0.0, "sample_lambda: alpha must be positive");
    Rng rng(seed);
    return rng.beta(alpha, alpha);
}

double iou(const FaceBox& a, const FaceBox& b) {
    check(a.valid(), "iou: first box is degenerate");
    check(b.valid(), "iou: second box is degenerate");
    // fixed operand order so iou(a, b) == iou(b, a) down to the last bit
    const FaceBox* p = &a;
    const FaceBox* q = &b;
    if (std::tie(q->x0, q->y0, q->x1, q->y1) < std::tie(p->x0, p->y0, p->x1, p->y1))
        std::swap(p, q);
    const double iw = std::max(0.0, std::min(p->x1, q->x1) - std::max(p->x0, q->x0));
    const double ih = std::max(0.0, std::min(p->y1, q->y1) - std::max(p->y0, q->y0));
    const double inter = iw * ih;
    return inter / (p->area() + q->area() - inter);
}

KappaMetric kappa_metric_from_string(const std::string& name) {
    if (name == "iou") return KappaMetric::iou;
    if (name == "psnr") return KappaMetric::psnr;
    if (name == "ssim") return KappaMetric::ssim;
    if (name == "fsim") return KappaMetric::fsim;
    fail("unknown kappa metric '", name, "' (expected iou/psnr/ssim/fsim)");
}

std::string to_string(KappaMetric m) {
    switch (m) {
        case KappaMetric::iou: return "iou";
        case KappaMetric::psnr: return "psnr";
        case KappaMetric::ssim: return "ssim";
        case KappaMetric::fsim: return "fsim";
    }
    return "?";
}

double kappa(const ImageSample& xi, const ImageSample& xj, KappaMetric metric,
             const data::BoxProvider& provider) {
    double k = 0.0;
    switch (metric) {
        case KappaMetric::iou:
            k = 1.0 - iou(data::face_box(provider, xi), data::face_box(provider, xj));
            break;
        case KappaMetric::psnr:
            k = 1.0 - std::min(1.0, image_similarity(SimilarityMetric::psnr, xi.pixels,
                                                     xj.pixels) / kPsnrCap);
            break;
        case KappaMetric::ssim:
            k = 1.0 - std::max(0.0, image_similarity(SimilarityMetric::ssim, xi.pixels,
                                                     xj.pixels));
            break;
        case KappaMetric::fsim:
            k = 1.0 - image_similarity(SimilarityMetric::fsim, xi.pixels, xj.pixels);
            break;
    }
    return std::clamp(k, 0.0, 1.0);
}

}  // namespace ssfer::aug
