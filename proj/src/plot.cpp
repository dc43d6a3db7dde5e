#include "ssfer/plot.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <map>

#include "ssfer/png_io.hpp"

namespace ssfer {

namespace {

// 5x7 glyphs, 'X' = on. Uppercase, digits and a few symbols are enough for
// axis labels; lowercase input is uppercased before lookup.
const std::map<char, std::array<const char*, 7>>& font() {
    static const std::map<char, std::array<const char*, 7>> f = {
        {' ', {"     ", "     ", "     ", "     ", "     ", "     ", "     "}},
        {'-', {"     ", "     ", "     ", "XXXXX", "     ", "     ", "     "}},
        {'+', {"     ", "  X  ", "  X  ", "XXXXX", "  X  ", "  X  ", "     "}},
        {'.', {"     ", "     ", "     ", "     ", "     ", " XX  ", " XX  "}},
        {',', {"     ", "     ", "     ", "     ", " XX  ", "  X  ", " X   "}},
        {':', {"     ", " XX  ", " XX  ", "     ", " XX  ", " XX  ", "     "}},
        {'=', {"     ", "     ", "XXXXX", "     ", "XXXXX", "     ", "     "}},
        {'/', {"    X", "    X", "   X ", "  X  ", " X   ", "X    ", "X    "}},
        {'%', {"XX  X", "XX  X", "   X ", "  X  ", " X   ", "X  XX", "X  XX"}},
        {'(', {"   X ", "  X  ", " X   ", " X   ", " X   ", "  X  ", "   X "}},
        {')', {" X   ", "  X  ", "   X ", "   X ", "   X ", "  X  ", " X   "}},
        {'_', {"     ", "     ", "     ", "     ", "     ", "     ", "XXXXX"}},
        {'0', {" XXX ", "X   X", "X  XX", "X X X", "XX  X", "X   X", " XXX "}},
        {'1', {"  X  ", " XX  ", "  X  ", "  X  ", "  X  ", "  X  ", " XXX "}},
        {'2', {" XXX ", "X   X", "    X", "   X ", "  X  ", " X   ", "XXXXX"}},
        {'3', {"XXXXX", "   X ", "  X  ", "   X ", "    X", "X   X", " XXX "}},
        {'4', {"   X ", "  XX ", " X X ", "X  X ", "XXXXX", "   X ", "   X "}},
        {'5', {"XXXXX", "X    ", "XXXX ", "    X", "    X", "X   X", " XXX "}},
        {'6', {"  XX ", " X   ", "X    ", "XXXX ", "X   X", "X   X", " XXX "}},
        {'7', {"XXXXX", "    X", "   X ", "  X  ", " X   ", " X   ", " X   "}},
        {'8', {" XXX ", "X   X", "X   X", " XXX ", "X   X", "X   X", " XXX "}},
        {'9', {" XXX ", "X   X", "X   X", " XXXX", "    X", "   X ", " XX  "}},
        {'A', {" XXX ", "X   X", "X   X", "XXXXX", "X   X", "X   X", "X   X"}},
        {'B', {"XXXX ", "X   X", "X   X", "XXXX ", "X   X", "X   X", "XXXX "}},
        {'C', {" XXX ", "X   X", "X    ", "X    ", "X    ", "X   X", " XXX "}},
        {'D', {"XXXX ", "X   X", "X   X", "X   X", "X   X", "X   X", "XXXX "}},
        {'E', {"XXXXX", "X    ", "X    ", "XXXX ", "X    ", "X    ", "XXXXX"}},
        {'F', {"XXXXX", "X    ", "X    ", "XXXX ", "X    ", "X    ", "X    "}},
        {'G', {" XXX ", "X   X", "X    ", "X XXX", "X   X", "X   X", " XXXX"}},
        {'H', {"X   X", "X   X", "X   X", "XXXXX", "X   X", "X   X", "X   X"}},
        {'I', {" XXX ", "  X  ", "  X  ", "  X  ", "  X  ", "  X  ", " XXX "}},
        {'J', {"  XXX", "   X ", "   X ", "   X ", "   X ", "X  X ", " XX  "}},
        {'K', {"X   X", "X  X ", "X X  ", "XX   ", "X X  ", "X  X ", "X   X"}},
        {'L', {"X    ", "X    ", "X    ", "X    ", "X    ", "X    ", "XXXXX"}},
        {'M', {"X   X", "XX XX", "X X X", "X X X", "X   X", "X   X", "X   X"}},
        {'N', {"X   X", "XX  X", "X X X", "X  XX", "X   X", "X   X", "X   X"}},
        {'O', {" XXX ", "X   X", "X   X", "X   X", "X   X", "X   X", " XXX "}},
        {'P', {"XXXX ", "X   X", "X   X", "XXXX ", "X    ", "X    ", "X    "}},
        {'Q', {" XXX ", "X   X", "X   X", "X   X", "X X X", "X  X ", " XX X"}},
        {'R', {"XXXX ", "X   X", "X   X", "XXXX ", "X X  ", "X  X ", "X   X"}},
        {'S', {" XXXX", "X    ", "X    ", " XXX ", "    X", "    X", "XXXX "}},
        {'T', {"XXXXX", "  X  ", "  X  ", "  X  ", "  X  ", "  X  ", "  X  "}},
        {'U', {"X   X", "X   X", "X   X", "X   X", "X   X", "X   X", " XXX "}},
        {'V', {"X   X", "X   X", "X   X", "X   X", "X   X", " X X ", "  X  "}},
        {'W', {"X   X", "X   X", "X   X", "X X X", "X X X", "XX XX", "X   X"}},
        {'X', {"X   X", "X   X", " X X ", "  X  ", " X X ", "X   X", "X   X"}},
        {'Y', {"X   X", "X   X", " X X ", "  X  ", "  X  ", "  X  ", "  X  "}},
        {'Z', {"XXXXX", "    X", "   X ", "  X  ", " X   ", "X    ", "XXXXX"}},
    };
    return f;
}

struct Rgb {
    float r, g, b;
};

const Rgb kPalette[] = {
    {0.12f, 0.47f, 0.71f}, {1.00f, 0.50f, 0.05f}, {0.17f, 0.63f, 0.17f},
    {0.84f, 0.15f, 0.16f}, {0.58f, 0.40f, 0.74f}, {0.55f, 0.34f, 0.29f},
};

void put_px(Image& img, int y, int x, float r, float g, float b) {
    if (y < 0 || y >= img.height || x < 0 || x >= img.width) return;
    img.at(y, x, 0) = r;
    img.at(y, x, 1) = g;
    img.at(y, x, 2) = b;
}

void fill_rect(Image& img, int y0, int x0, int y1, int x1, float r, float g, float b) {
    for (int y = std::max(0, y0); y < std::min(img.height, y1); ++y)
        for (int x = std::max(0, x0); x < std::min(img.width, x1); ++x) put_px(img, y, x, r, g, b);
}

void draw_line(Image& img, int y0, int x0, int y1, int x1, float r, float g, float b,
               int thick = 1) {
    int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        for (int ty = 0; ty < thick; ++ty)
            for (int tx = 0; tx < thick; ++tx) put_px(img, y0 + ty, x0 + tx, r, g, b);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

std::string format_tick(double v) {
    char buf[32];
    const double av = std::abs(v);
    if (v == 0.0)
        std::snprintf(buf, sizeof buf, "0");
    else if (av >= 1e4 || av < 1e-3)
        std::snprintf(buf, sizeof buf, "%.1e", v);
    else
        std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// rounds a raw step to 1/2/5 * 10^k
double nice_step(double span, int target) {
    if (span <= 0) return 1.0;
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    double nice = 10.0;
    if (frac <= 1.0)
        nice = 1.0;
    else if (frac <= 2.0)
        nice = 2.0;
    else if (frac <= 5.0)
        nice = 5.0;
    return nice * mag;
}

struct Range {
    double lo, hi;
};

Range data_range(const std::vector<Series>& series, bool use_x) {
    double lo = 0, hi = 1;
    bool first = true;
    for (const auto& s : series) {
        const auto& v = use_x ? s.x : s.y;
        for (double d : v) {
            if (!std::isfinite(d)) continue;
            if (first) {
                lo = hi = d;
                first = false;
            } else {
                lo = std::min(lo, d);
                hi = std::max(hi, d);
            }
        }
    }
    if (first) return {0, 1};
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

}  // namespace

int text_width(const std::string& text, int scale) {
    return static_cast<int>(text.size()) * 6 * scale;
}

void draw_text(Image& img, int y, int x, const std::string& text, float r, float g, float b,
               int scale) {
    const auto& f = font();
    int cx = x;
    for (char raw : text) {
        char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
        auto it = f.find(ch);
        if (it == f.end()) it = f.find(' ');
        for (int row = 0; row < 7; ++row)
            for (int col = 0; col < 5; ++col)
                if (it->second[row][col] == 'X')
                    fill_rect(img, y + row * scale, cx + col * scale, y + (row + 1) * scale,
                              cx + (col + 1) * scale, r, g, b);
        cx += 6 * scale;
    }
}

void line_plot(const std::string& path, const std::string& title, const std::string& xlabel,
               const std::string& ylabel, const std::vector<Series>& series, int width,
               int height) {
    Image img(height, width, 3, 1.0f);
    const int ml = 70, mr = 20, mt = 36, mb = 48;
    const int px0 = ml, px1 = width - mr, py0 = mt, py1 = height - mb;

    const Range rx = data_range(series, true);
    const Range ry = data_range(series, false);
    auto to_px = [&](double v) {
        return px0 + static_cast<int>(std::lround((v - rx.lo) / (rx.hi - rx.lo) * (px1 - px0)));
    };
    auto to_py = [&](double v) {
        return py1 - static_cast<int>(std::lround((v - ry.lo) / (ry.hi - ry.lo) * (py1 - py0)));
    };

    // grid + ticks
    const double sx = nice_step(rx.hi - rx.lo, 6);
    const double sy = nice_step(ry.hi - ry.lo, 6);
    for (double t = std::ceil(rx.lo / sx) * sx; t <= rx.hi + 1e-12; t += sx) {
        const int x = to_px(t);
        draw_line(img, py0, x, py1, x, 0.9f, 0.9f, 0.9f);
        const std::string lab = format_tick(t);
        draw_text(img, py1 + 8, x - text_width(lab) / 2, lab, 0.2f, 0.2f, 0.2f);
    }
    for (double t = std::ceil(ry.lo / sy) * sy; t <= ry.hi + 1e-12; t += sy) {
        const int y = to_py(t);
        draw_line(img, y, px0, y, px1, 0.9f, 0.9f, 0.9f);
        const std::string lab = format_tick(t);
        draw_text(img, y - 3, px0 - 6 - text_width(lab), lab, 0.2f, 0.2f, 0.2f);
    }
    draw_line(img, py1, px0, py1, px1, 0, 0, 0);
    draw_line(img, py0, px0, py1, px0, 0, 0, 0);

    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const Rgb c = kPalette[si % std::size(kPalette)];
        for (size_t i = 0; i + 1 < s.x.size(); ++i)
            draw_line(img, to_py(s.y[i]), to_px(s.x[i]), to_py(s.y[i + 1]), to_px(s.x[i + 1]), c.r,
                      c.g, c.b, 2);
        for (size_t i = 0; i < s.x.size(); ++i)
            fill_rect(img, to_py(s.y[i]) - 2, to_px(s.x[i]) - 2, to_py(s.y[i]) + 3,
                      to_px(s.x[i]) + 3, c.r, c.g, c.b);
        // legend swatch
        const int ly = py0 + 6 + static_cast<int>(si) * 12;
        fill_rect(img, ly, px1 - 120, ly + 7, px1 - 110, c.r, c.g, c.b);
        draw_text(img, ly, px1 - 104, s.name, 0.1f, 0.1f, 0.1f);
    }

    draw_text(img, 10, (width - text_width(title, 2)) / 2, title, 0, 0, 0, 2);
    draw_text(img, height - 16, (width - text_width(xlabel)) / 2, xlabel, 0.2f, 0.2f, 0.2f);
    draw_text(img, py0 - 14, 8, ylabel, 0.2f, 0.2f, 0.2f);
    write_png(path, img);
}

void bar_plot(const std::string& path, const std::string& title,
              const std::vector<std::string>& labels, const std::vector<double>& values,
              int width, int height) {
    check(labels.size() == values.size(), "bar_plot: labels/values size mismatch");
    Image img(height, width, 3, 1.0f);
    const int ml = 70, mr = 20, mt = 36, mb = 56;
    const int px0 = ml, px1 = width - mr, py0 = mt, py1 = height - mb;
    double hi = 0.0;
    for (double v : values) hi = std::max(hi, v);
    if (hi <= 0) hi = 1.0;
    hi *= 1.08;

    const double sy = nice_step(hi, 6);
    for (double t = 0; t <= hi + 1e-12; t += sy) {
        const int y = py1 - static_cast<int>(std::lround(t / hi * (py1 - py0)));
        draw_line(img, y, px0, y, px1, 0.9f, 0.9f, 0.9f);
        const std::string lab = format_tick(t);
        draw_text(img, y - 3, px0 - 6 - text_width(lab), lab, 0.2f, 0.2f, 0.2f);
    }
    const int n = static_cast<int>(values.size());
    const int slot = (px1 - px0) / std::max(1, n);
    for (int i = 0; i < n; ++i) {
        const int bx0 = px0 + i * slot + slot / 6;
        const int bx1 = px0 + (i + 1) * slot - slot / 6;
        const int by = py1 - static_cast<int>(std::lround(values[i] / hi * (py1 - py0)));
        const Rgb c = kPalette[0];
        fill_rect(img, by, bx0, py1, bx1, c.r, c.g, c.b);
        draw_text(img, py1 + 8, px0 + i * slot + (slot - text_width(labels[i])) / 2, labels[i],
                  0.2f, 0.2f, 0.2f);
        const std::string val = format_tick(values[i]);
        draw_text(img, by - 10, px0 + i * slot + (slot - text_width(val)) / 2, val, 0.1f, 0.1f,
                  0.1f);
    }
    draw_line(img, py1, px0, py1, px1, 0, 0, 0);
    draw_line(img, py0, px0, py1, px0, 0, 0, 0);
    draw_text(img, 10, (width - text_width(title, 2)) / 2, title, 0, 0, 0, 2);
    write_png(path, img);
}

void heatmap_png(const std::string& path, const std::string& title,
                 const std::vector<std::vector<double>>& cells,
                 const std::vector<std::string>& row_labels,
                 const std::vector<std::string>& col_labels) {
    check(!cells.empty() && !cells[0].empty(), "heatmap_png: empty matrix");
    const int nr = static_cast<int>(cells.size());
    const int nc = static_cast<int>(cells[0].size());
    const int cell = 56, ml = 80, mt = 56, mb = 24, mr = 24;
    Image img(mt + nr * cell + mb, ml + nc * cell + mr, 3, 1.0f);

    double vmax = 0.0;
    for (const auto& row : cells)
        for (double v : row) vmax = std::max(vmax, v);
    if (vmax <= 0) vmax = 1.0;

    for (int i = 0; i < nr; ++i) {
        for (int j = 0; j < nc; ++j) {
            const double f = cells[i][j] / vmax;
            // white -> blue ramp
            const float r = static_cast<float>(1.0 - 0.88 * f);
            const float g = static_cast<float>(1.0 - 0.53 * f);
            const float b = static_cast<float>(1.0 - 0.29 * f);
            const int y0 = mt + i * cell, x0 = ml + j * cell;
            fill_rect(img, y0, x0, y0 + cell, x0 + cell, r, g, b);
            const std::string v = format_tick(cells[i][j]);
            const float tc = f > 0.55f ? 1.0f : 0.0f;
            draw_text(img, y0 + cell / 2 - 3, x0 + (cell - text_width(v)) / 2, v, tc, tc, tc);
        }
    }
    for (int i = 0; i <= nr; ++i)
        draw_line(img, mt + i * cell, ml, mt + i * cell, ml + nc * cell, 0.6f, 0.6f, 0.6f);
    for (int j = 0; j <= nc; ++j)
        draw_line(img, mt, ml + j * cell, mt + nr * cell, ml + j * cell, 0.6f, 0.6f, 0.6f);
    for (int i = 0; i < nr && i < static_cast<int>(row_labels.size()); ++i)
        draw_text(img, mt + i * cell + cell / 2 - 3, 8, row_labels[i], 0, 0, 0);
    for (int j = 0; j < nc && j < static_cast<int>(col_labels.size()); ++j)
        draw_text(img, mt - 14, ml + j * cell + (cell - text_width(col_labels[j])) / 2,
                  col_labels[j], 0, 0, 0);
    draw_text(img, 10, (img.width - text_width(title, 2)) / 2, title, 0, 0, 0, 2);
    write_png(path, img);
}

void image_grid_png(const std::string& path, const std::vector<std::vector<Image>>& rows,
                    const std::vector<std::string>& captions, int upscale) {
    check(!rows.empty() && !rows[0].empty(), "image_grid_png: empty grid");
    const int ih = rows[0][0].height * upscale;
    const int iw = rows[0][0].width * upscale;
    const int sep = 2, cap_h = captions.empty() ? 0 : 12;
    size_t ncols = 0;
    for (const auto& r : rows) ncols = std::max(ncols, r.size());
    const int W = static_cast<int>(ncols) * (iw + sep) + sep;
    const int H = static_cast<int>(rows.size()) * (ih + sep + cap_h) + sep;
    Image canvas(H, W, 3, 0.25f);
    for (size_t ri = 0; ri < rows.size(); ++ri) {
        const int oy = sep + static_cast<int>(ri) * (ih + sep + cap_h) + cap_h;
        if (!captions.empty() && ri < captions.size())
            draw_text(canvas, oy - cap_h + 2, sep, captions[ri], 1, 1, 1);
        for (size_t ci = 0; ci < rows[ri].size(); ++ci) {
            const Image& tile = rows[ri][ci];
            check(tile.channels == 3 || tile.channels == 1, "image_grid_png: bad channels");
            const int ox = sep + static_cast<int>(ci) * (iw + sep);
            for (int y = 0; y < ih; ++y)
                for (int x = 0; x < iw; ++x)
                    for (int c = 0; c < 3; ++c)
                        canvas.at(oy + y, ox + x, c) = clamp01(
                            tile.at(y / upscale, x / upscale, tile.channels == 1 ? 0 : c));
        }
    }
    write_png(path, canvas);
}

}  // namespace ssfer
