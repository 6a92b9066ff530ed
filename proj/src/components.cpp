#include "taskforge/components.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace taskforge {

namespace {

constexpr int kDx[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
constexpr int kDy[8] = {-1, -1, -1, 0, 0, 1, 1, 1};

std::vector<Component> label(const BinaryMask& fg) {
  std::vector<Component> out;
  std::vector<std::uint8_t> seen(fg.bits.size(), 0);
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < fg.height; ++y) {
    for (int x = 0; x < fg.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * fg.width + x;
      if (!fg.bits[i] || seen[i]) continue;
      Component comp{BinaryMask(fg.width, fg.height), BoundingBox{x, y, x, y}, 0};
      seen[i] = 1;
      stack.assign(1, {x, y});
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        comp.pixels.set(cx, cy);
        ++comp.area;
        comp.box.x0 = std::min(comp.box.x0, cx);
        comp.box.x1 = std::max(comp.box.x1, cx);
        comp.box.y0 = std::min(comp.box.y0, cy);
        comp.box.y1 = std::max(comp.box.y1, cy);
        for (int k = 0; k < 8; ++k) {
          const int nx = cx + kDx[k];
          const int ny = cy + kDy[k];
          if (!fg.contains(nx, ny)) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * fg.width + nx;
          if (fg.bits[j] && !seen[j]) {
            seen[j] = 1;
            stack.emplace_back(nx, ny);
          }
        }
      }
      out.push_back(std::move(comp));
    }
  }
  return out;
}

// Lower envelope of parabolas (Felzenszwalb-Huttenlocher); f must be finite.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = diff * diff + f[v[k]];
  }
}

}  // namespace

std::vector<Component> connected_components(const SegMap& mask, ClassId class_id) {
  if (!mask.present().contains(class_id)) return {};
  BinaryMask fg(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y) == class_id) fg.set(x, y);
    }
  }
  return label(fg);
}

std::vector<Component> connected_components(const BinaryMask& mask) { return label(mask); }

std::vector<double> squared_distance_transform(const BinaryMask& mask) {
  const int w = mask.width;
  const int h = mask.height;
  std::vector<double> grid(static_cast<std::size_t>(w) * h, 0.0);
  // Column pass: distance to the nearest background pixel in the column,
  // with the rows just outside the raster acting as background.
  for (int x = 0; x < w; ++x) {
    int last = -1;
    for (int y = 0; y < h; ++y) {
      if (!mask.get(x, y)) last = y;
      grid[static_cast<std::size_t>(y) * w + x] = y - last;
    }
    last = h;
    for (int y = h - 1; y >= 0; --y) {
      if (!mask.get(x, y)) last = y;
      double& g = grid[static_cast<std::size_t>(y) * w + x];
      g = std::min<double>(g, last - y);
      g *= g;
    }
  }
  // Row pass over the squared column distances, padded with a background
  // pixel (value 0) at both ends.
  std::vector<double> f(w + 2), d(w + 2), z(w + 3);
  std::vector<int> v(w + 2);
  for (int y = 0; y < h; ++y) {
    f[0] = 0.0;
    f[w + 1] = 0.0;
    for (int x = 0; x < w; ++x) f[x + 1] = grid[static_cast<std::size_t>(y) * w + x];
    edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) grid[static_cast<std::size_t>(y) * w + x] = d[x + 1];
  }
  return grid;
}

std::pair<int, int> representative_point(const BinaryMask& component) {
  const auto dist = squared_distance_transform(component);
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (int y = 0; y < component.height; ++y) {
    for (int x = 0; x < component.width; ++x) {
      if (component.get(x, y)) {
        sx += x;
        sy += y;
        ++n;
      }
    }
  }
  if (n == 0) return {-1, -1};
  const double cx = sx / n;
  const double cy = sy / n;
  std::pair<int, int> best{-1, -1};
  double best_dist = -1, best_off = 0;
  for (int y = 0; y < component.height; ++y) {
    for (int x = 0; x < component.width; ++x) {
      if (!component.get(x, y)) continue;
      const double dt = dist[static_cast<std::size_t>(y) * component.width + x];
      const double off = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      if (dt > best_dist || (dt == best_dist && off < best_off)) {
        best = {x, y};
        best_dist = dt;
        best_off = off;
      }
    }
  }
  return best;
}

BinaryMask medial_axis(const BinaryMask& component) {
  const int w = component.width;
  const int h = component.height;
  BinaryMask img = component;
  if (w == 0 || h == 0) return img;
  auto px = [&](int x, int y) -> int { return img.contains(x, y) && img.get(x, y) ? 1 : 0; };

  std::vector<std::pair<int, int>> to_clear;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      to_clear.clear();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!img.get(x, y)) continue;
          // Neighbours P2..P9, clockwise from north.
          const int p[8] = {px(x, y - 1), px(x + 1, y - 1), px(x + 1, y), px(x + 1, y + 1),
                            px(x, y + 1), px(x - 1, y + 1), px(x - 1, y), px(x - 1, y - 1)};
          int b = 0, a = 0;
          for (int k = 0; k < 8; ++k) {
            b += p[k];
            if (p[k] == 0 && p[(k + 1) % 8] == 1) ++a;
          }
          if (b < 2 || b > 6 || a != 1) continue;
          const int n = p[0], e = p[2], s = p[4], wv = p[6];
          if (pass == 0) {
            if (n * e * s != 0 || e * s * wv != 0) continue;
          } else {
            if (n * e * wv != 0 || n * s * wv != 0) continue;
          }
          to_clear.emplace_back(x, y);
        }
      }
      for (auto [x, y] : to_clear) img.set(x, y, false);
      if (!to_clear.empty()) changed = true;
    }
  }

  // Restore components that thinning erased completely.
  for (const auto& comp : connected_components(component)) {
    bool survived = false;
    for (int y = comp.box.y0; y <= comp.box.y1 && !survived; ++y) {
      for (int x = comp.box.x0; x <= comp.box.x1; ++x) {
        if (comp.pixels.get(x, y) && img.get(x, y)) {
          survived = true;
          break;
        }
      }
    }
    if (!survived) {
      auto [rx, ry] = representative_point(comp.pixels);
      img.set(rx, ry);
    }
  }
  return img;
}

}  // namespace taskforge
