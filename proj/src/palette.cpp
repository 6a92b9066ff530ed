#include "taskforge/palette.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "taskforge/error.hpp"

namespace taskforge {

namespace {

constexpr int kColorAttempts = 2000;
constexpr std::uint64_t kFixedPaletteSeed = 0x5EED'C010'0000'0001ULL;

bool far_enough(Rgb a, Rgb b, double floor) {
  return static_cast<double>(squared_distance(a, b)) >= floor * floor;
}

std::string describe(Rgb c) {
  return "(" + std::to_string(c.r) + "," + std::to_string(c.g) + "," + std::to_string(c.b) + ")";
}

}  // namespace

Palette::Palette(std::map<ClassId, Rgb> colors, Rgb background, double floor)
    : colors_(std::move(colors)), background_(background), floor_(floor) {
  if (colors_.contains(kBackground)) {
    throw PaletteError("palette must not assign a colour to the background id 0");
  }
  for (auto it = colors_.begin(); it != colors_.end(); ++it) {
    if (it->second == background_ || !far_enough(it->second, background_, floor_)) {
      throw PaletteError("class " + std::to_string(it->first) + " colour " + describe(it->second) +
                         " is closer than the floor to the background");
    }
    for (auto jt = std::next(it); jt != colors_.end(); ++jt) {
      if (it->second == jt->second || !far_enough(it->second, jt->second, floor_)) {
        throw PaletteError("classes " + std::to_string(it->first) + " and " +
                           std::to_string(jt->first) + " have colours closer than the floor");
      }
    }
  }
}

Rgb Palette::color(ClassId id) const {
  if (id == kBackground) return background_;
  auto it = colors_.find(id);
  if (it == colors_.end()) throw PaletteError("palette has no colour for class " + std::to_string(id));
  return it->second;
}

std::optional<ClassId> Palette::lookup(Rgb color) const {
  if (color == background_) return kBackground;
  for (const auto& [id, c] : colors_) {
    if (c == color) return id;
  }
  return std::nullopt;
}

Palette Palette::restricted(const std::set<ClassId>& keep) const {
  std::map<ClassId, Rgb> sub;
  for (ClassId id : keep) {
    if (id == kBackground) continue;
    sub.emplace(id, color(id));
  }
  return Palette(std::move(sub), background_, floor_);
}

std::size_t max_palette_classes(double floor) {
  constexpr std::size_t kAllColours = 256u * 256u * 256u - 1;
  if (floor <= 1.0) return kAllColours;
  // Disjoint balls of radius floor/2 around every colour (background
  // included) must fit in the channel cube grown by floor/2 per side.
  const double ball = 4.0 / 3.0 * std::numbers::pi * std::pow(floor / 2, 3);
  const double bound = std::pow(255.0 + floor, 3) / ball;
  return std::min(kAllColours, static_cast<std::size_t>(bound) - 1);
}

Palette sample_palette(const std::set<ClassId>& classes, RngState& rng, double floor,
                       Rgb background) {
  if (classes.empty()) throw PaletteError("cannot sample a palette for an empty class set");
  if (classes.contains(kBackground)) throw PaletteError("background id 0 cannot receive a palette colour");
  if (classes.size() > max_palette_classes(floor)) {
    throw PaletteError("cannot fit " + std::to_string(classes.size()) +
                       " colours at distance floor " + std::to_string(floor));
  }
  std::map<ClassId, Rgb> colors;
  for (ClassId id : classes) {
    bool placed = false;
    for (int attempt = 0; attempt < kColorAttempts && !placed; ++attempt) {
      Rgb c{static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
            static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
            static_cast<std::uint8_t>(rng.uniform_int(0, 255))};
      if (c == background || !far_enough(c, background, floor)) continue;
      bool ok = true;
      for (const auto& [other, oc] : colors) {
        if (c == oc || !far_enough(c, oc, floor)) {
          ok = false;
          break;
        }
      }
      if (ok) {
        colors.emplace(id, c);
        placed = true;
      }
    }
    if (!placed) {
      throw PaletteError("could not place a colour for class " + std::to_string(id) + " after " +
                         std::to_string(kColorAttempts) + " attempts");
    }
  }
  return Palette(std::move(colors), background, floor);
}

Palette fixed_palette(ClassId max_class_id, double floor) {
  std::set<ClassId> ids;
  for (ClassId c = 1; c <= max_class_id; ++c) ids.insert(c);
  RngState rng(kFixedPaletteSeed);
  return sample_palette(ids, rng, floor);
}

}  // namespace taskforge
