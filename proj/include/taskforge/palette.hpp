#pragma once

#include <map>
#include <optional>
#include <set>

#include "taskforge/image.hpp"
#include "taskforge/rng.hpp"

namespace taskforge {

inline constexpr double kDefaultPaletteFloor = 48.0;

// Class id -> colour assignment. Construction validates that the mapping is
// injective and that all colours (background included) are at least `floor`
// apart in RGB space.
class Palette {
 public:
  Palette() = default;
  Palette(std::map<ClassId, Rgb> colors, Rgb background = {},
          double floor = kDefaultPaletteFloor);

  const std::map<ClassId, Rgb>& colors() const { return colors_; }
  Rgb background() const { return background_; }
  double floor() const { return floor_; }
  bool covers(ClassId id) const { return colors_.contains(id); }
  Rgb color(ClassId id) const;
  std::optional<ClassId> lookup(Rgb color) const;

  // Sub-palette limited to `keep` (ids absent from the palette are an error).
  Palette restricted(const std::set<ClassId>& keep) const;

  friend bool operator==(const Palette&, const Palette&) = default;

 private:
  std::map<ClassId, Rgb> colors_;
  Rgb background_{};
  double floor_ = kDefaultPaletteFloor;
};

// Random injective palette whose colours are pairwise >= floor apart and
// >= floor from the background. Throws PaletteError when the request cannot
// be met (class count above a sphere-packing bound, or retries exhausted).
Palette sample_palette(const std::set<ClassId>& classes, RngState& rng,
                       double floor = kDefaultPaletteFloor, Rgb background = {});

// Upper bound on the number of class colours that can coexist with the
// background at the given distance floor (sphere-packing argument).
std::size_t max_palette_classes(double floor = kDefaultPaletteFloor);

// Palette used for the fixed-colour protocol: ids 1..max_class_id drawn in
// ascending order from a constant seed, so the colour of id c does not depend
// on how many ids follow it.
Palette fixed_palette(ClassId max_class_id, double floor = kDefaultPaletteFloor);

}  // namespace taskforge
