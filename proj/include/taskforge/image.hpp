#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <vector>

namespace taskforge {

using ClassId = std::uint32_t;
inline constexpr ClassId kBackground = 0;

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend auto operator<=>(const Rgb&, const Rgb&) = default;
};

// Squared Euclidean distance in 8-bit channel space.
constexpr int squared_distance(Rgb a, Rgb b) {
  int dr = int(a.r) - int(b.r);
  int dg = int(a.g) - int(b.g);
  int db = int(a.b) - int(b.b);
  return dr * dr + dg * dg + db * db;
}

// H x W x 3 raster of 8-bit values, row-major, interleaved channels.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});
  Image(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  bool is_square() const { return width_ == height_; }

  Rgb at(int x, int y) const {
    const auto* p = &pixels_[index(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    auto* p = &pixels_[index(x, y)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }
  std::uint8_t channel(int x, int y, int c) const { return pixels_[index(x, y) + c]; }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Raster of class ids. `present` is always the exact set of non-background
// ids in the raster; the raster is immutable so the two cannot drift apart.
class SegMap {
 public:
  SegMap() = default;
  SegMap(int width, int height, std::vector<ClassId> classes);
  SegMap(int width, int height, ClassId fill = kBackground);

  int width() const { return width_; }
  int height() const { return height_; }
  ClassId at(int x, int y) const { return classes_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const ClassId> classes() const { return classes_; }
  const std::set<ClassId>& present() const { return present_; }

  friend bool operator==(const SegMap& a, const SegMap& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.classes_ == b.classes_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<ClassId> classes_;
  std::set<ClassId> present_;
};

// Single-channel foreground/background raster (1 = foreground).
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool get(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t count() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

// Bilinear resize with pixel-center alignment; same-size input is returned
// unchanged.
Image resize_bilinear(const Image& image, int width, int height);
Image resize_nearest(const Image& image, int width, int height);
// Nearest-neighbour only: class ids are never interpolated.
SegMap resize_nearest(const SegMap& mask, int width, int height);

// Square structuring-element dilation; width must be odd.
BinaryMask dilate_square(const BinaryMask& mask, int width);

}  // namespace taskforge
