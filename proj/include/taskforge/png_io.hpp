#pragma once

#include <filesystem>

#include "taskforge/image.hpp"

namespace taskforge {

// 8-bit RGB PNG. Grayscale and palette PNGs are expanded to RGB on read.
Image read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const Image& image);

// Class-id raster stored as 8-bit grayscale PNG (ids must be < 256).
SegMap read_png_mask(const std::filesystem::path& path);
void write_png_mask(const std::filesystem::path& path, const SegMap& mask);

}  // namespace taskforge
