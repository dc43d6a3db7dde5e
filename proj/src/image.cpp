#include "ssfer/image.hpp"

#include <cmath>
#include <iostream>

namespace ssfer {

void log_warn(const std::string& msg) { std::cerr << "[warn] " << msg << "\n"; }
void log_info(const std::string& msg) { std::cerr << "[info] " << msg << "\n"; }

void clip01(Image& img) {
    for (float& v : img.data) v = clamp01(v);
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
    check(out_h > 0 && out_w > 0, "resize_bilinear: bad output size");
    if (out_h == src.height && out_w == src.width) return src;
    Image out(out_h, out_w, src.channels);
    const double sy = static_cast<double>(src.height) / out_h;
    const double sx = static_cast<double>(src.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        if (fy < 0) fy = 0;
        if (fy > src.height - 1) fy = src.height - 1;
        const int y0 = static_cast<int>(fy);
        const int y1 = y0 + 1 < src.height ? y0 + 1 : y0;
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            if (fx < 0) fx = 0;
            if (fx > src.width - 1) fx = src.width - 1;
            const int x0 = static_cast<int>(fx);
            const int x1 = x0 + 1 < src.width ? x0 + 1 : x0;
            const double wx = fx - x0;
            for (int c = 0; c < src.channels; ++c) {
                const double top = (1.0 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
                const double bot = (1.0 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
                out.at(y, x, c) = static_cast<float>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return out;
}

Image crop(const Image& src, int y0, int x0, int h, int w) {
    check(y0 >= 0 && x0 >= 0 && h > 0 && w > 0 && y0 + h <= src.height && x0 + w <= src.width,
          "crop: window out of bounds");
    Image out(h, w, src.channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < src.channels; ++c) out.at(y, x, c) = src.at(y0 + y, x0 + x, c);
    return out;
}

Image hflip(const Image& src) {
    Image out(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c)
                out.at(y, x, c) = src.at(y, src.width - 1 - x, c);
    return out;
}

Image affine_warp(const Image& src, const double m[4], double ty, double tx, double fill) {
    Image out(src.height, src.width, src.channels);
    const double cy = 0.5 * (src.height - 1);
    const double cx = 0.5 * (src.width - 1);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const double dy = y - cy;
            const double dx = x - cx;
            const double sy = m[0] * dy + m[1] * dx + cy + ty;
            const double sx = m[2] * dy + m[3] * dx + cx + tx;
            const int y0 = static_cast<int>(std::floor(sy));
            const int x0 = static_cast<int>(std::floor(sx));
            const double wy = sy - y0;
            const double wx = sx - x0;
            for (int c = 0; c < src.channels; ++c) {
                auto sample = [&](int yy, int xx) -> double {
                    if (yy < 0 || yy >= src.height || xx < 0 || xx >= src.width) return fill;
                    return src.at(yy, xx, c);
                };
                const double top = (1.0 - wx) * sample(y0, x0) + wx * sample(y0, x0 + 1);
                const double bot = (1.0 - wx) * sample(y0 + 1, x0) + wx * sample(y0 + 1, x0 + 1);
                out.at(y, x, c) = static_cast<float>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return out;
}

Image channel_mean(const Image& src) {
    if (src.channels == 1) return src;
    Image out(src.height, src.width, 1);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            float s = 0.0f;
            for (int c = 0; c < src.channels; ++c) s += src.at(y, x, c);
            out.at(y, x, 0) = s / src.channels;
        }
    return out;
}

double mse(const Image& a, const Image& b) {
    check(a.same_shape(b), "mse: shape mismatch");
    check(!a.data.empty(), "mse: empty image");
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

}  // namespace ssfer
