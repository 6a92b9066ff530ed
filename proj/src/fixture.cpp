#include "taskforge/fixture.hpp"

#include <algorithm>
#include <cmath>

#include "taskforge/error.hpp"

namespace taskforge {

namespace {

constexpr int kMinCell = 8;
constexpr int kMargin = 2;  // gap keeping shapes from touching diagonally

struct ClassLayout {
  bool ellipse = true;
  double rx_frac = 0.3;  // radius as a fraction of the cell side
  double ry_frac = 0.3;
  Rgb color;
};

struct Shape {
  bool ellipse;
  double cx, cy, rx, ry;

  bool contains(int x, int y) const {
    const double px = x + 0.5 - cx;
    const double py = y + 0.5 - cy;
    if (ellipse) return (px * px) / (rx * rx) + (py * py) / (ry * ry) <= 1.0;
    return std::abs(px) <= rx && std::abs(py) <= ry;
  }
  // Normalised radial position in [0, 1] inside the shape.
  double radial(int x, int y) const {
    const double px = (x + 0.5 - cx) / rx;
    const double py = (y + 0.5 - cy) / ry;
    return ellipse ? std::sqrt(px * px + py * py) : std::max(std::abs(px), std::abs(py));
  }
};

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

std::vector<DatasetRecord> generate_fixture(int n_records, int n_classes, int side, RngState rng,
                                            const FixtureOptions& options) {
  if (n_records < 0) throw ParameterError("n_records must be non-negative");
  if (n_classes < 1) throw ParameterError("fixture needs at least one class");
  if (side < 16) throw ParameterError("fixture side must be >= 16, got " + std::to_string(side));

  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_classes))));
  const double cell = static_cast<double>(side) / grid;
  if (cell < kMinCell) {
    throw FixtureError("cannot place " + std::to_string(n_classes) + " non-overlapping shapes in a " +
                       std::to_string(side) + "px raster");
  }

  // Dataset-level layout: shared by every record.
  RngState layout_rng = rng.derive("layout");
  std::vector<ClassLayout> layout(n_classes);
  for (auto& l : layout) {
    l.ellipse = layout_rng.bernoulli(0.6);
    l.rx_frac = layout_rng.uniform(0.2, 0.3);
    l.ry_frac = layout_rng.uniform(0.2, 0.3);
    l.color = {static_cast<std::uint8_t>(layout_rng.uniform_int(90, 250)),
               static_cast<std::uint8_t>(layout_rng.uniform_int(90, 250)),
               static_cast<std::uint8_t>(layout_rng.uniform_int(90, 250))};
  }
  const Rgb bg0{static_cast<std::uint8_t>(layout_rng.uniform_int(10, 60)),
                static_cast<std::uint8_t>(layout_rng.uniform_int(10, 60)),
                static_cast<std::uint8_t>(layout_rng.uniform_int(10, 60))};
  const Rgb bg1{static_cast<std::uint8_t>(layout_rng.uniform_int(40, 110)),
                static_cast<std::uint8_t>(layout_rng.uniform_int(40, 110)),
                static_cast<std::uint8_t>(layout_rng.uniform_int(40, 110))};

  std::vector<DatasetRecord> records;
  records.reserve(n_records);
  for (int r = 0; r < n_records; ++r) {
    RngState rec_rng = rng.derive(static_cast<std::uint64_t>(r));

    std::vector<bool> include(n_classes, false);
    include[rec_rng.uniform_index(n_classes)] = true;
    for (int c = 0; c < n_classes; ++c) {
      if (rec_rng.bernoulli(options.class_presence)) include[c] = true;
    }

    std::vector<ClassId> classes(static_cast<std::size_t>(side) * side, kBackground);
    // Occupancy grown by the margin, used to reject touching shapes.
    BinaryMask occupied(side, side);
    std::vector<std::pair<ClassId, Shape>> shapes;
    for (int c = 0; c < n_classes; ++c) {
      if (!include[c]) continue;
      const ClassLayout& l = layout[c];
      const double cell_x = (c % grid + 0.5) * cell;
      const double cell_y = (c / grid + 0.5) * cell;
      bool placed = false;
      for (int attempt = 0; attempt < options.max_placement_attempts && !placed; ++attempt) {
        const double shrink = 1.0 - 0.5 * attempt / options.max_placement_attempts;
        Shape s{l.ellipse,
                cell_x + rec_rng.uniform(-options.jitter, options.jitter) * cell,
                cell_y + rec_rng.uniform(-options.jitter, options.jitter) * cell,
                std::max(1.5, shrink * l.rx_frac * cell * rec_rng.uniform(0.85, 1.15)),
                std::max(1.5, shrink * l.ry_frac * cell * rec_rng.uniform(0.85, 1.15))};
        const int x0 = std::max(0, static_cast<int>(std::floor(s.cx - s.rx)) - 1);
        const int x1 = std::min(side - 1, static_cast<int>(std::ceil(s.cx + s.rx)) + 1);
        const int y0 = std::max(0, static_cast<int>(std::floor(s.cy - s.ry)) - 1);
        const int y1 = std::min(side - 1, static_cast<int>(std::ceil(s.cy + s.ry)) + 1);
        bool ok = true;
        std::size_t area = 0;
        for (int y = y0; y <= y1 && ok; ++y) {
          for (int x = x0; x <= x1; ++x) {
            if (!s.contains(x, y)) continue;
            ++area;
            if (occupied.get(x, y)) {
              ok = false;
              break;
            }
          }
        }
        if (!ok || area == 0) continue;
        for (int y = y0; y <= y1; ++y) {
          for (int x = x0; x <= x1; ++x) {
            if (!s.contains(x, y)) continue;
            classes[static_cast<std::size_t>(y) * side + x] = static_cast<ClassId>(c + 1);
            for (int dy = -kMargin; dy <= kMargin; ++dy) {
              for (int dx = -kMargin; dx <= kMargin; ++dx) {
                if (occupied.contains(x + dx, y + dy)) occupied.set(x + dx, y + dy);
              }
            }
          }
        }
        shapes.emplace_back(static_cast<ClassId>(c + 1), s);
        placed = true;
      }
      if (!placed) {
        throw FixtureError("could not place a shape for class " + std::to_string(c + 1) + " in record " +
                           std::to_string(r) + " without overlap");
      }
    }

    Image image(side, side);
    const double phase = rec_rng.uniform(0.0, 6.283185307179586);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const double t = (x + y) / (2.0 * side);
        const double wave = 8.0 * std::sin(phase + 6.0 * x / side) * std::cos(4.0 * y / side);
        image.set(x, y, {to_byte(bg0.r + (bg1.r - bg0.r) * t + wave),
                         to_byte(bg0.g + (bg1.g - bg0.g) * t + wave),
                         to_byte(bg0.b + (bg1.b - bg0.b) * t + wave)});
      }
    }
    for (const auto& [id, s] : shapes) {
      const Rgb base = layout[id - 1].color;
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          if (classes[static_cast<std::size_t>(y) * side + x] != id) continue;
          const double shade = 0.7 + 0.3 * (1.0 - std::min(1.0, s.radial(x, y)));
          const double grain = rec_rng.uniform(-4.0, 4.0);
          image.set(x, y, {to_byte(base.r * shade + grain), to_byte(base.g * shade + grain),
                           to_byte(base.b * shade + grain)});
        }
      }
    }

    records.emplace_back("r" + std::to_string(r), std::move(image),
                         SegMap(side, side, std::move(classes)), options.dataset_id);
  }
  return records;
}

Dataset make_fixture_dataset(int n_records, int n_classes, int side, RngState rng,
                             const FixtureOptions& options) {
  Dataset ds;
  ds.id = options.dataset_id;
  for (int c = 1; c <= n_classes; ++c) ds.class_names.emplace(c, "class_" + std::to_string(c));
  for (auto& r : generate_fixture(n_records, n_classes, side, rng, options)) {
    ds.records.push_back(std::make_shared<const DatasetRecord>(std::move(r)));
  }
  return ds;
}

}  // namespace taskforge
