#pragma once

#include <cstddef>
#include <vector>

#include "taskforge/image.hpp"

namespace taskforge {

struct BoundingBox {
  int x0 = 0;  // inclusive
  int y0 = 0;
  int x1 = 0;  // inclusive
  int y1 = 0;

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Component {
  BinaryMask pixels;  // full-size raster holding only this component
  BoundingBox box;
  std::size_t area = 0;
};

// 8-connected components of one class, in row-major order of their first
// pixel. An absent class yields an empty list.
std::vector<Component> connected_components(const SegMap& mask, ClassId class_id);
std::vector<Component> connected_components(const BinaryMask& mask);

// Zhang-Suen thinning. Components that thinning would erase entirely (e.g.
// 2x2 blocks) keep their innermost pixel so the component count is preserved.
BinaryMask medial_axis(const BinaryMask& component);

// Exact squared Euclidean distance from each foreground pixel to the nearest
// background pixel; pixels outside the raster count as background.
std::vector<double> squared_distance_transform(const BinaryMask& mask);

// Innermost pixel of a component: maximum of the distance transform, ties
// resolved toward the centroid, then by row-major order.
std::pair<int, int> representative_point(const BinaryMask& component);

}  // namespace taskforge
