#include <cmath>
#include <cstdio>

#include "ssfer/dataset.hpp"
#include "ssfer/rng.hpp"

namespace ssfer::data {

namespace {

// all geometry in continuous [0,S]x[0,S] coordinates; pixel (row i, col j)
// has center (j+0.5, i+0.5)
struct FaceGeometry {
    double cx, cy, rx, ry;
    double bright;
    double eye_r;
    double mouth_halfw;
    double mouth_amp;  // signed curvature: >0 bends downward (sad), <0 upward
};

// per-row horizontal pixel span of the ellipse; returns false for empty rows.
// the renderer and the stored box both use this, so the stored box is the
// exact tight bound of the rendered face by construction
bool ellipse_row_span(const FaceGeometry& g, int row, int* jmin, int* jmax) {
    const double y = row + 0.5;
    const double t = (y - g.cy) / g.ry;
    if (std::abs(t) > 1.0) return false;
    const double w = g.rx * std::sqrt(1.0 - t * t);
    const int lo = static_cast<int>(std::ceil(g.cx - w - 0.5));
    const int hi = static_cast<int>(std::floor(g.cx + w - 0.5));
    if (lo > hi) return false;
    *jmin = lo;
    *jmax = hi;
    return true;
}

FaceGeometry sample_geometry(const SynthSpec& spec, Rng& rng, int label) {
    const double S = spec.image_size;
    const double j = spec.jitter;
    auto u = [&] { return rng.uniform(-1.0, 1.0); };

    FaceGeometry g;
    g.cx = 0.5 * S + j * 0.12 * S * u();
    g.cy = 0.5 * S + j * 0.08 * S * u();
    g.rx = 0.30 * S * (1.0 + j * 0.25 * u());
    g.ry = 0.34 * S * (1.0 + j * 0.20 * u());
    g.bright = 1.0 + j * 0.15 * u();
    g.eye_r = 0.14 * g.rx * (1.0 + j * 0.30 * u());
    g.mouth_halfw = 0.46 * g.rx * (1.0 + j * 0.20 * u());

    // class signal: curvature scales linearly from +1 (class 0, mouth corners
    // up in row coordinates = sad) to -1 (last class, happy)
    const double amp = 0.20 * g.ry * (1.0 + j * 0.25 * u());
    const double cls = spec.class_count > 1
                           ? 1.0 - 2.0 * label / static_cast<double>(spec.class_count - 1)
                           : 0.0;
    g.mouth_amp = cls * amp;
    return g;
}

SynthSample render_face(const SynthSpec& spec, const FaceGeometry& g) {
    const int S = spec.image_size;
    const float skin[3] = {0.80f, 0.62f, 0.50f};
    const float eye[3] = {0.12f, 0.10f, 0.10f};
    const float mouth[3] = {0.55f, 0.15f, 0.18f};
    const float b = static_cast<float>(g.bright);

    SynthSample out;
    Image img(S, S, 3);
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = kBackground[c];
    out.expression_mask.assign(static_cast<size_t>(S) * S, 0);

    const double ex_off = 0.40 * g.rx;
    const double ey = g.cy - 0.32 * g.ry;
    const double my = g.cy + 0.34 * g.ry;
    const double thick = std::max(1.0, 0.09 * g.ry);

    int bx0 = S, bx1 = -1, by0 = S, by1 = -1;
    for (int row = 0; row < S; ++row) {
        int jmin, jmax;
        if (!ellipse_row_span(g, row, &jmin, &jmax)) continue;
        by0 = std::min(by0, row);
        by1 = std::max(by1, row);
        bx0 = std::min(bx0, jmin);
        bx1 = std::max(bx1, jmax);
        const double y = row + 0.5;
        for (int col = jmin; col <= jmax; ++col) {
            const double x = col + 0.5;
            const float* color = skin;
            bool expr = false;
            for (int side = -1; side <= 1; side += 2) {
                const double dx = x - (g.cx + side * ex_off);
                const double dy = y - ey;
                if (dx * dx + dy * dy <= g.eye_r * g.eye_r) {
                    color = eye;
                    expr = true;
                }
            }
            const double mx = x - g.cx;
            if (!expr && std::abs(mx) <= g.mouth_halfw) {
                const double rel = mx / g.mouth_halfw;
                const double curve_y = my + g.mouth_amp * rel * rel;
                if (std::abs(y - curve_y) <= 0.5 * thick) {
                    color = mouth;
                    expr = true;
                }
            }
            for (int c = 0; c < 3; ++c) img.at(row, col, c) = clamp01(color[c] * b);
            if (expr) out.expression_mask[static_cast<size_t>(row) * S + col] = 1;
        }
    }
    check(bx1 >= bx0 && by1 >= by0, "synth_generate: face rendered empty");

    out.sample.pixels = std::move(img);
    out.sample.face_box = FaceBox{static_cast<double>(bx0), static_cast<double>(by0),
                                  static_cast<double>(bx1 + 1), static_cast<double>(by1 + 1)};
    return out;
}

}  // namespace

std::vector<SynthSample> synth_generate_detailed(const SynthSpec& spec) {
    check(spec.n_samples >= 0, "synth_generate: negative sample count");
    check(spec.class_count >= 2, "synth_generate: need at least two classes");
    check(spec.image_size >= 16, "synth_generate: image_size must be >= 16");
    check(spec.jitter >= 0.0 && spec.jitter <= 1.0, "synth_generate: jitter must be in [0,1]");

    std::vector<SynthSample> out;
    out.reserve(spec.n_samples);
    for (int i = 0; i < spec.n_samples; ++i) {
        // per-sample stream, independent of n_samples
        uint64_t state = spec.seed + 0x9e3779b97f4a7c15ULL * (static_cast<uint64_t>(i) + 1);
        Rng rng(splitmix64(state));
        const int label = i % spec.class_count;
        SynthSample s = render_face(spec, sample_geometry(spec, rng, label));
        char id[32];
        std::snprintf(id, sizeof id, "synth-%06d", i);
        s.sample.id = id;
        s.sample.label = label;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ImageSample> synth_generate(const SynthSpec& spec) {
    std::vector<SynthSample> detailed = synth_generate_detailed(spec);
    std::vector<ImageSample> out;
    out.reserve(detailed.size());
    for (auto& d : detailed) out.push_back(std::move(d.sample));
    return out;
}

}  // namespace ssfer::data
