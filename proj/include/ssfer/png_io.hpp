#pragma once

#include <string>

#include "ssfer/image.hpp"

namespace ssfer {

// 8-bit PNG, gray / gray+alpha / RGB / RGBA; values mapped to [0,1] on read
Image read_png(const std::string& path);

// writes 8-bit gray (1 channel) or RGB (3 channels), values clamped to [0,1]
void write_png(const std::string& path, const Image& img);

}  // namespace ssfer
