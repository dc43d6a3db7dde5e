#include <algorithm>
#include <cmath>
#include <vector>

#include "ssfer/augment.hpp"

namespace ssfer::aug {

namespace {

using Grid = std::vector<double>;  // height*width doubles

Grid to_grid(const Image& img) {
    const Image g = channel_mean(img);
    Grid out(g.data.begin(), g.data.end());
    return out;
}

double at(const Grid& g, int h, int w, int y, int x) {
    y = std::clamp(y, 0, h - 1);  // replicate border
    x = std::clamp(x, 0, w - 1);
    return g[static_cast<size_t>(y) * w + x];
}

Grid gaussian_blur(const Grid& g, int h, int w, double sigma) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& v : k) v /= sum;

    Grid tmp(g.size()), out(g.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * at(g, h, w, y, x + i);
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * at(tmp, h, w, y + i, x);
            out[static_cast<size_t>(y) * w + x] = acc;
        }
    return out;
}

Grid sobel_magnitude(const Grid& g, int h, int w) {
    Grid out(g.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = at(g, h, w, y - 1, x + 1) + 2 * at(g, h, w, y, x + 1) +
                              at(g, h, w, y + 1, x + 1) - at(g, h, w, y - 1, x - 1) -
                              2 * at(g, h, w, y, x - 1) - at(g, h, w, y + 1, x - 1);
            const double gy = at(g, h, w, y + 1, x - 1) + 2 * at(g, h, w, y + 1, x) +
                              at(g, h, w, y + 1, x + 1) - at(g, h, w, y - 1, x - 1) -
                              2 * at(g, h, w, y - 1, x) - at(g, h, w, y - 1, x + 1);
            out[static_cast<size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
        }
    return out;
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

// 7x7 Gaussian window (sigma 1.5), valid positions only, channel-mean gray
double ssim(const Image& ia, const Image& ib) {
    constexpr int W = 7;
    constexpr double kSigma = 1.5;
    constexpr double C1 = 0.01 * 0.01;
    constexpr double C2 = 0.03 * 0.03;
    check(ia.height >= W && ia.width >= W, "ssim: image smaller than the 7x7 window");

    const Grid a = to_grid(ia);
    const Grid b = to_grid(ib);
    const int h = ia.height, w = ia.width;

    double win[W][W];
    double wsum = 0.0;
    for (int i = 0; i < W; ++i)
        for (int j = 0; j < W; ++j) {
            const double dy = i - (W - 1) / 2.0, dx = j - (W - 1) / 2.0;
            wsum += win[i][j] = std::exp(-0.5 * (dy * dy + dx * dx) / (kSigma * kSigma));
        }
    for (int i = 0; i < W; ++i)
        for (int j = 0; j < W; ++j) win[i][j] /= wsum;

    double total = 0.0;
    int count = 0;
    for (int y = 0; y + W <= h; ++y)
        for (int x = 0; x + W <= w; ++x) {
            double ma = 0, mb = 0;
            for (int i = 0; i < W; ++i)
                for (int j = 0; j < W; ++j) {
                    ma += win[i][j] * a[static_cast<size_t>(y + i) * w + x + j];
                    mb += win[i][j] * b[static_cast<size_t>(y + i) * w + x + j];
                }
            double va = 0, vb = 0, cov = 0;
            for (int i = 0; i < W; ++i)
                for (int j = 0; j < W; ++j) {
                    const double da = a[static_cast<size_t>(y + i) * w + x + j] - ma;
                    const double db = b[static_cast<size_t>(y + i) * w + x + j] - mb;
                    va += win[i][j] * da * da;
                    vb += win[i][j] * db * db;
                    cov += win[i][j] * da * db;
                }
            total += ((2 * ma * mb + C1) * (2 * cov + C2)) /
                     ((ma * ma + mb * mb + C1) * (va + vb + C2));
            ++count;
        }
    return total / count;
}

// Simplified feature similarity: Sobel gradient-magnitude similarity weighted
// by a difference-of-Gaussians band-pass energy standing in for phase
// congruency. Both maps are per-image max-normalized. Good enough as a
// monotone [0,1] similarity for the mixing weight; not the full transform.
double fsim(const Image& ia, const Image& ib) {
    constexpr double T_pc = 0.85;
    constexpr double T_g = 160.0 / (255.0 * 255.0);
    const Grid a = to_grid(ia);
    const Grid b = to_grid(ib);
    const int h = ia.height, w = ia.width;

    auto bandpass = [&](const Grid& g) {
        const Grid g1 = gaussian_blur(g, h, w, 1.0);
        const Grid g2 = gaussian_blur(g, h, w, 2.0);
        Grid pc(g.size());
        double mx = 0.0;
        for (size_t i = 0; i < g.size(); ++i) mx = std::max(mx, pc[i] = std::abs(g1[i] - g2[i]));
        if (mx > 1e-12)
            for (double& v : pc) v /= mx;
        return pc;
    };
    const Grid pc1 = bandpass(a);
    const Grid pc2 = bandpass(b);
    const Grid g1 = sobel_magnitude(a, h, w);
    const Grid g2 = sobel_magnitude(b, h, w);

    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double s_pc =
            (2 * pc1[i] * pc2[i] + T_pc) / (pc1[i] * pc1[i] + pc2[i] * pc2[i] + T_pc);
        const double s_g = (2 * g1[i] * g2[i] + T_g) / (g1[i] * g1[i] + g2[i] * g2[i] + T_g);
        const double pcm = std::max(pc1[i], pc2[i]);
        num += s_pc * s_g * pcm;
        den += pcm;
    }
    if (den <= 1e-12) return 1.0;  // both images featureless
    return num / den;
}

}  // namespace

double image_similarity(SimilarityMetric metric, const Image& xi, const Image& xj) {
    check(xi.same_shape(xj), "image_similarity: shape mismatch");
    check(!xi.data.empty(), "image_similarity: empty image");
    switch (metric) {
        case SimilarityMetric::psnr: return psnr(xi, xj);
        case SimilarityMetric::ssim: return ssim(xi, xj);
        case SimilarityMetric::fsim: return fsim(xi, xj);
    }
    fail("image_similarity: unreachable");
}

}  // namespace ssfer::aug
