#include "taskforge/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "taskforge/error.hpp"

namespace taskforge {

namespace {

void check_dims(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw DimensionError("raster dimensions must be positive, got " + std::to_string(width) +
                         "x" + std::to_string(height));
  }
}

}  // namespace

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  check_dims(width, height);
  pixels_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

Image::Image(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dims(width, height);
  if (pixels_.size() != static_cast<std::size_t>(width) * height * 3) {
    throw DimensionError("pixel buffer length does not match " + std::to_string(width) + "x" +
                         std::to_string(height) + "x3");
  }
}

SegMap::SegMap(int width, int height, std::vector<ClassId> classes)
    : width_(width), height_(height), classes_(std::move(classes)) {
  check_dims(width, height);
  if (classes_.size() != static_cast<std::size_t>(width) * height) {
    throw DimensionError("class raster length does not match " + std::to_string(width) + "x" +
                         std::to_string(height));
  }
  for (ClassId c : classes_) {
    if (c != kBackground) present_.insert(c);
  }
}

SegMap::SegMap(int width, int height, ClassId fill)
    : SegMap(width, height, std::vector<ClassId>(static_cast<std::size_t>(std::max(width, 0)) *
                                                     std::max(height, 0),
                                                 fill)) {}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

Image resize_bilinear(const Image& image, int width, int height) {
  check_dims(width, height);
  if (image.width() == width && image.height() == height) return image;
  Image out(width, height);
  const double sx = static_cast<double>(image.width()) / width;
  const double sy = static_cast<double>(image.height()) / height;
  for (int y = 0; y < height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, image.height() - 1);
    double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, image.width() - 1);
      double wx = fx - x0;
      std::uint8_t v[3];
      for (int c = 0; c < 3; ++c) {
        double top = image.channel(x0, y0, c) * (1 - wx) + image.channel(x1, y0, c) * wx;
        double bottom = image.channel(x0, y1, c) * (1 - wx) + image.channel(x1, y1, c) * wx;
        v[c] = static_cast<std::uint8_t>(std::clamp(std::lround(top * (1 - wy) + bottom * wy), 0L, 255L));
      }
      out.set(x, y, {v[0], v[1], v[2]});
    }
  }
  return out;
}

namespace {

int nearest_source(int dst, int dst_size, int src_size) {
  // Pixel-centre mapping, computed in integers so it is exact.
  long long v = (2LL * dst + 1) * src_size / (2LL * dst_size);
  return static_cast<int>(std::min<long long>(v, src_size - 1));
}

}  // namespace

Image resize_nearest(const Image& image, int width, int height) {
  check_dims(width, height);
  if (image.width() == width && image.height() == height) return image;
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    int sy = nearest_source(y, height, image.height());
    for (int x = 0; x < width; ++x) {
      out.set(x, y, image.at(nearest_source(x, width, image.width()), sy));
    }
  }
  return out;
}

SegMap resize_nearest(const SegMap& mask, int width, int height) {
  check_dims(width, height);
  if (mask.width() == width && mask.height() == height) return mask;
  std::vector<ClassId> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    int sy = nearest_source(y, height, mask.height());
    for (int x = 0; x < width; ++x) {
      out[static_cast<std::size_t>(y) * width + x] = mask.at(nearest_source(x, width, mask.width()), sy);
    }
  }
  return SegMap(width, height, std::move(out));
}

BinaryMask dilate_square(const BinaryMask& mask, int width) {
  if (width < 1 || width % 2 == 0) {
    throw ParameterError("dilation width must be odd and positive, got " + std::to_string(width));
  }
  if (width == 1) return mask;
  const int r = width / 2;
  // Separable: horizontal pass then vertical pass.
  BinaryMask horiz(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.get(x, y)) continue;
      for (int dx = -r; dx <= r; ++dx) {
        if (horiz.contains(x + dx, y)) horiz.set(x + dx, y);
      }
    }
  }
  BinaryMask out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!horiz.get(x, y)) continue;
      for (int dy = -r; dy <= r; ++dy) {
        if (out.contains(x, y + dy)) out.set(x, y + dy);
      }
    }
  }
  return out;
}

}  // namespace taskforge
