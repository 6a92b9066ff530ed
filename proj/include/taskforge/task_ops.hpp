#pragma once

#include <set>
#include <string>
#include <variant>
#include <vector>

#include "taskforge/image.hpp"
#include "taskforge/palette.hpp"
#include "taskforge/rng.hpp"

namespace taskforge {

// ---------------------------------------------------------------------------
// Generative degradations. The degraded image is the task input and the
// undegraded image the restoration target.

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct SuperRes {
  int target_side = 100;
  friend bool operator==(const SuperRes&, const SuperRes&) = default;
};
struct Inpaint {
  std::vector<Rect> rects;
  friend bool operator==(const Inpaint&, const Inpaint&) = default;
};
struct Noise {
  double mean = 0.0;   // 8-bit units
  double sigma = 0.0;  // 8-bit units
  friend bool operator==(const Noise&, const Noise&) = default;
};
struct ColorJitter {
  double hue = 0.0;         // fraction of the hue circle
  double saturation = 0.0;  // relative change
  double brightness = 0.0;  // relative change
  friend bool operator==(const ColorJitter&, const ColorJitter&) = default;
};
struct Invert {
  friend bool operator==(const Invert&, const Invert&) = default;
};
struct Equalize {
  friend bool operator==(const Equalize&, const Equalize&) = default;
};
struct Brightness {
  double factor = 1.0;
  friend bool operator==(const Brightness&, const Brightness&) = default;
};

using GenerativeKind =
    std::variant<SuperRes, Inpaint, Noise, ColorJitter, Invert, Equalize, Brightness>;
inline constexpr std::size_t kGenerativeFamilyCount = std::variant_size_v<GenerativeKind>;

enum class TransformKind { FlipH, FlipV, Rot90, Rot180, Rot270 };
inline constexpr std::size_t kTransformKindCount = 5;

enum class DiscriminativeTask { Segmentation, Edges, Boxes, Skeleton, Points };
inline constexpr std::size_t kDiscriminativeTaskCount = 5;

struct DiscriminativeKind {
  DiscriminativeTask task = DiscriminativeTask::Segmentation;
  int width = 1;  // stroke width, one of {1, 3, 5}; ignored for Segmentation
  friend bool operator==(const DiscriminativeKind&, const DiscriminativeKind&) = default;
};

inline constexpr int kStrokeWidths[] = {1, 3, 5};
inline constexpr int kSuperResSides[] = {25, 50, 100};
inline constexpr int kSuperResReferenceSide = 200;

std::string label(const GenerativeKind& kind);
std::string label(TransformKind kind);
std::string label(const DiscriminativeKind& kind);
// Family name without parameters ("noise", "edges", ...).
std::string family_name(const GenerativeKind& kind);
std::string family_name(DiscriminativeTask task);

TransformKind inverse(TransformKind kind);

// ---------------------------------------------------------------------------
// Parameter sampling within the configured ranges.

// `family` indexes the GenerativeKind alternatives. SuperRes target sides are
// {25,50,100} scaled by side/200.
GenerativeKind sample_generative(std::size_t family, int side, RngState& rng);
TransformKind sample_transform(RngState& rng);
DiscriminativeKind sample_discriminative(DiscriminativeTask task, RngState& rng);

// Throws ParameterError for invalid parameters.
void validate(const GenerativeKind& kind, int width, int height);
void validate(const DiscriminativeKind& kind);

// ---------------------------------------------------------------------------
// Operators.

// Same dimensions in and out. Throws ParameterError (invalid parameters).
Image apply_generative(const Image& image, const GenerativeKind& kind, RngState& rng);

// Exact pixel permutation; rotations are clockwise and need a square raster
// (DimensionError otherwise).
Image apply_transform(const Image& image, TransformKind kind);
SegMap apply_transform(const SegMap& mask, TransformKind kind);

// Background-coloured raster with per-class structures drawn in ascending
// class-id order. Throws PaletteError when a present id has no colour.
Image render_discriminative(const SegMap& mask, const DiscriminativeKind& kind,
                            const Palette& palette);

// Ids outside `keep` become background. Empty keep -> ParameterError.
SegMap subsample_classes(const SegMap& mask, const std::set<ClassId>& keep);

// Raster with only `class_id` kept.
SegMap isolate_class(const SegMap& mask, ClassId class_id);

// Binary boundary of all classes: a non-background pixel whose 4-neighbour
// has a different id. Pixels beyond the raster edge are not boundaries.
BinaryMask class_boundary(const SegMap& mask, ClassId class_id);

// ---------------------------------------------------------------------------
// Enrichment: every single-image task variant derived from one record.

struct TaskVariant {
  enum class Family { Image, Generative, Transform, Discriminative };
  Family family = Family::Image;
  GenerativeKind generative{};
  TransformKind transform = TransformKind::FlipH;
  DiscriminativeKind discriminative{};

  std::string label() const;
  std::string bucket() const;  // family-level name used for balancing
};

// The full enumeration: the raw image, the seven generative families (three
// super-resolution sides), five transforms and the discriminative families at
// every stroke width. Generative parameters are drawn from `rng`.
std::vector<TaskVariant> enumerate_task_variants(int side, RngState& rng);

// Produces the task output image for one variant of one record.
Image render_variant(const TaskVariant& variant, const Image& image, const SegMap& mask,
                     const Palette& palette, RngState& rng);

}  // namespace taskforge
