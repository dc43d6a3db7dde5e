#pragma once

#include <string>
#include <vector>

#include "ssfer/image.hpp"

namespace ssfer {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

// simple raster plots, written straight to PNG
void line_plot(const std::string& path, const std::string& title, const std::string& xlabel,
               const std::string& ylabel, const std::vector<Series>& series, int width = 720,
               int height = 480);

void bar_plot(const std::string& path, const std::string& title,
              const std::vector<std::string>& labels, const std::vector<double>& values,
              int width = 720, int height = 480);

// row-major matrix heatmap with per-cell value text (confusion matrices)
void heatmap_png(const std::string& path, const std::string& title,
                 const std::vector<std::vector<double>>& cells,
                 const std::vector<std::string>& row_labels,
                 const std::vector<std::string>& col_labels);

// tiles rows of images (all same size) with separators, optional row captions
void image_grid_png(const std::string& path, const std::vector<std::vector<Image>>& rows,
                    const std::vector<std::string>& captions = {}, int upscale = 3);

// text rendering used by the plots; exposed for tests
void draw_text(Image& img, int y, int x, const std::string& text, float r, float g, float b,
               int scale = 1);
int text_width(const std::string& text, int scale = 1);

}  // namespace ssfer
