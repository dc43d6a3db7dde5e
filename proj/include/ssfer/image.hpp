#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssfer/common.hpp"

namespace ssfer {

// float pixels in [0,1], interleaved channels, index (y*width + x)*channels + c
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c), data(static_cast<size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

// axis-aligned box in pixel units, half-open: [x0,x1) x [y0,y1)
struct FaceBox {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    bool valid() const { return x1 > x0 && y1 > y0; }
};

struct ImageSample {
    std::string id;
    Image pixels;
    std::optional<int> label;
    std::optional<FaceBox> face_box;
};

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

void clip01(Image& img);

// bilinear; output pixel centers mapped by scale = in/out, so a same-size
// resize is an exact copy
Image resize_bilinear(const Image& src, int out_h, int out_w);

Image crop(const Image& src, int y0, int x0, int h, int w);
Image hflip(const Image& src);

// inverse-mapped affine on pixel centers:
// src = M * (dst - center) + center + t, out-of-bounds samples read as `fill`
Image affine_warp(const Image& src, const double m[4], double ty, double tx, double fill);

Image channel_mean(const Image& src);  // -> 1-channel

double mse(const Image& a, const Image& b);

}  // namespace ssfer
