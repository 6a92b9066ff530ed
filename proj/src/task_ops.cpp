#include "taskforge/task_ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "taskforge/components.hpp"
#include "taskforge/error.hpp"

namespace taskforge {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

std::string format_param(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Source coordinate for output pixel (x, y) of a transform on a w x h raster.
std::pair<int, int> transform_source(TransformKind kind, int w, int h, int x, int y) {
  switch (kind) {
    case TransformKind::FlipH:
      return {w - 1 - x, y};
    case TransformKind::FlipV:
      return {x, h - 1 - y};
    case TransformKind::Rot90:
      return {y, h - 1 - x};
    case TransformKind::Rot180:
      return {w - 1 - x, h - 1 - y};
    case TransformKind::Rot270:
      return {w - 1 - y, x};
  }
  return {x, y};
}

void check_transform_dims(TransformKind kind, int w, int h) {
  const bool rotation = kind == TransformKind::Rot90 || kind == TransformKind::Rot180 ||
                        kind == TransformKind::Rot270;
  if (rotation && w != h) {
    throw DimensionError("rotation needs a square raster, got " + std::to_string(w) + "x" +
                         std::to_string(h));
  }
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0.0;
  if (d == 0) {
    h = 0;
  } else if (mx == r) {
    h = std::fmod((g - b) / d + 6.0, 6.0) / 6.0;
  } else if (mx == g) {
    h = ((b - r) / d + 2.0) / 6.0;
  } else {
    h = ((r - g) / d + 4.0) / 6.0;
  }
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = h * 6.0;
  const int i = static_cast<int>(std::floor(hh)) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s);
  const double q = v * (1 - s * f);
  const double t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

Image super_res(const Image& image, int target) {
  const int w = image.width();
  const int h = image.height();
  const int tw = std::min(target, w);
  const int th = std::min(target, h);
  // Box downsample: output cell o averages source pixels [o*S/T, (o+1)*S/T).
  Image small(tw, th);
  for (int oy = 0; oy < th; ++oy) {
    const int y0 = static_cast<int>(static_cast<long long>(oy) * h / th);
    const int y1 = static_cast<int>(static_cast<long long>(oy + 1) * h / th);
    for (int ox = 0; ox < tw; ++ox) {
      const int x0 = static_cast<int>(static_cast<long long>(ox) * w / tw);
      const int x1 = static_cast<int>(static_cast<long long>(ox + 1) * w / tw);
      std::array<long, 3> sum{};
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          for (int c = 0; c < 3; ++c) sum[c] += image.channel(x, y, c);
        }
      }
      const double n = static_cast<double>((y1 - y0) * (x1 - x0));
      small.set(ox, oy, {clamp_byte(sum[0] / n), clamp_byte(sum[1] / n), clamp_byte(sum[2] / n)});
    }
  }
  // Nearest upsample back onto the original grid.
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    const int sy = static_cast<int>(static_cast<long long>(y) * th / h);
    for (int x = 0; x < w; ++x) {
      out.set(x, y, small.at(static_cast<int>(static_cast<long long>(x) * tw / w), sy));
    }
  }
  return out;
}

Image equalize(const Image& image) {
  Image out = image;
  const std::size_t total = static_cast<std::size_t>(image.width()) * image.height();
  auto src = image.pixels();
  auto dst = out.pixels();
  for (int c = 0; c < 3; ++c) {
    std::array<std::size_t, 256> hist{};
    for (std::size_t i = c; i < src.size(); i += 3) ++hist[src[i]];
    std::array<std::size_t, 256> cdf{};
    std::size_t run = 0, cdf_min = 0;
    for (int v = 0; v < 256; ++v) {
      run += hist[v];
      cdf[v] = run;
      if (cdf_min == 0 && run > 0) cdf_min = run;
    }
    if (total == cdf_min) continue;  // constant channel
    for (std::size_t i = c; i < src.size(); i += 3) {
      const double num = static_cast<double>(cdf[src[i]] - cdf_min);
      dst[i] = clamp_byte(num * 255.0 / static_cast<double>(total - cdf_min));
    }
  }
  return out;
}

void paint(Image& out, const BinaryMask& mask, Rgb color) {
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.get(x, y)) out.set(x, y, color);
    }
  }
}

BinaryMask class_region(const SegMap& mask, ClassId id) {
  BinaryMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y) == id) out.set(x, y);
    }
  }
  return out;
}

BinaryMask disc_at(int w, int h, int cx, int cy, int width) {
  BinaryMask out(w, h);
  const double r = width / 2.0;
  const int ri = width / 2;
  for (int dy = -ri; dy <= ri; ++dy) {
    for (int dx = -ri; dx <= ri; ++dx) {
      if (dx * dx + dy * dy <= r * r && out.contains(cx + dx, cy + dy)) out.set(cx + dx, cy + dy);
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string family_name(const GenerativeKind& kind) {
  return std::visit(Overloaded{[](const SuperRes&) { return std::string("super_res"); },
                               [](const Inpaint&) { return std::string("inpaint"); },
                               [](const Noise&) { return std::string("noise"); },
                               [](const ColorJitter&) { return std::string("color_jitter"); },
                               [](const Invert&) { return std::string("invert"); },
                               [](const Equalize&) { return std::string("equalize"); },
                               [](const Brightness&) { return std::string("brightness"); }},
                    kind);
}

std::string label(const GenerativeKind& kind) {
  return std::visit(
      Overloaded{[](const SuperRes& k) { return "super_res_" + std::to_string(k.target_side); },
                 [](const Inpaint& k) { return "inpaint_" + std::to_string(k.rects.size()); },
                 [](const Noise& k) { return "noise_" + format_param(k.sigma); },
                 [](const ColorJitter&) { return std::string("color_jitter"); },
                 [](const Invert&) { return std::string("invert"); },
                 [](const Equalize&) { return std::string("equalize"); },
                 [](const Brightness& k) { return "brightness_" + format_param(k.factor); }},
      kind);
}

std::string label(TransformKind kind) {
  switch (kind) {
    case TransformKind::FlipH: return "flip_h";
    case TransformKind::FlipV: return "flip_v";
    case TransformKind::Rot90: return "rot90";
    case TransformKind::Rot180: return "rot180";
    case TransformKind::Rot270: return "rot270";
  }
  return "?";
}

std::string family_name(DiscriminativeTask task) {
  switch (task) {
    case DiscriminativeTask::Segmentation: return "segmentation";
    case DiscriminativeTask::Edges: return "edges";
    case DiscriminativeTask::Boxes: return "boxes";
    case DiscriminativeTask::Skeleton: return "skeleton";
    case DiscriminativeTask::Points: return "points";
  }
  return "?";
}

std::string label(const DiscriminativeKind& kind) {
  if (kind.task == DiscriminativeTask::Segmentation) return "segmentation";
  return family_name(kind.task) + "_w" + std::to_string(kind.width);
}

TransformKind inverse(TransformKind kind) {
  switch (kind) {
    case TransformKind::Rot90: return TransformKind::Rot270;
    case TransformKind::Rot270: return TransformKind::Rot90;
    default: return kind;
  }
}

// ---------------------------------------------------------------------------

GenerativeKind sample_generative(std::size_t family, int side, RngState& rng) {
  switch (family) {
    case 0: {
      const int nominal = kSuperResSides[rng.uniform_index(std::size(kSuperResSides))];
      return SuperRes{std::max(1, nominal * side / kSuperResReferenceSide)};
    }
    case 1: {
      Inpaint k;
      const auto count = rng.uniform_int(1, 4);
      const double area = static_cast<double>(side) * side;
      for (int i = 0; i < count; ++i) {
        const double frac = rng.uniform(0.05, 0.20);
        const double aspect = rng.uniform(0.5, 2.0);
        int w = std::clamp(static_cast<int>(std::lround(std::sqrt(frac * area * aspect))), 1, side);
        int h = std::clamp(static_cast<int>(std::lround(frac * area / w)), 1, side);
        const int x = static_cast<int>(rng.uniform_int(0, side - w));
        const int y = static_cast<int>(rng.uniform_int(0, side - h));
        k.rects.push_back({x, y, w, h});
      }
      return k;
    }
    case 2:
      return Noise{rng.uniform(-0.1, 0.1) * 255.0, rng.uniform(0.02, 0.25) * 255.0};
    case 3:
      return ColorJitter{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
    case 4:
      return Invert{};
    case 5:
      return Equalize{};
    case 6:
      return Brightness{rng.uniform(0.5, 1.5)};
    default:
      throw ParameterError("unknown generative family index " + std::to_string(family));
  }
}

TransformKind sample_transform(RngState& rng) {
  return static_cast<TransformKind>(rng.uniform_index(kTransformKindCount));
}

DiscriminativeKind sample_discriminative(DiscriminativeTask task, RngState& rng) {
  DiscriminativeKind k{task, 1};
  if (task != DiscriminativeTask::Segmentation) {
    k.width = kStrokeWidths[rng.uniform_index(std::size(kStrokeWidths))];
  }
  return k;
}

void validate(const GenerativeKind& kind, int width, int height) {
  std::visit(Overloaded{[&](const SuperRes& k) {
                          if (k.target_side < 1 || k.target_side > std::min(width, height)) {
                            throw ParameterError("super-resolution target side " +
                                                 std::to_string(k.target_side) + " out of range");
                          }
                        },
                        [&](const Inpaint& k) {
                          for (const Rect& r : k.rects) {
                            if (r.width <= 0 || r.height <= 0 || r.x < 0 || r.y < 0 ||
                                r.x + r.width > width || r.y + r.height > height) {
                              throw ParameterError("inpaint rectangle outside the image bounds");
                            }
                          }
                        },
                        [](const Noise& k) {
                          if (!(k.sigma >= 0)) throw ParameterError("noise sigma must be >= 0");
                        },
                        [](const Brightness& k) {
                          if (!(k.factor >= 0)) throw ParameterError("brightness factor must be >= 0");
                        },
                        [](const auto&) {}},
             kind);
}

void validate(const DiscriminativeKind& kind) {
  if (kind.task == DiscriminativeTask::Segmentation) return;
  if (std::find(std::begin(kStrokeWidths), std::end(kStrokeWidths), kind.width) == std::end(kStrokeWidths)) {
    throw ParameterError("stroke width must be one of {1,3,5}, got " + std::to_string(kind.width));
  }
}

// ---------------------------------------------------------------------------

Image apply_generative(const Image& image, const GenerativeKind& kind, RngState& rng) {
  validate(kind, image.width(), image.height());
  return std::visit(
      Overloaded{
          [&](const SuperRes& k) { return super_res(image, k.target_side); },
          [&](const Inpaint& k) {
            Image out = image;
            for (const Rect& r : k.rects) {
              for (int y = r.y; y < r.y + r.height; ++y) {
                for (int x = r.x; x < r.x + r.width; ++x) out.set(x, y, Rgb{});
              }
            }
            return out;
          },
          [&](const Noise& k) {
            Image out = image;
            if (k.mean == 0.0 && k.sigma == 0.0) return out;
            for (auto& v : out.pixels()) v = clamp_byte(v + k.mean + k.sigma * rng.normal());
            return out;
          },
          [&](const ColorJitter& k) {
            Image out = image;
            for (int y = 0; y < image.height(); ++y) {
              for (int x = 0; x < image.width(); ++x) {
                const Rgb p = image.at(x, y);
                double h, s, v;
                rgb_to_hsv(p.r / 255.0, p.g / 255.0, p.b / 255.0, h, s, v);
                h = h + k.hue;
                h -= std::floor(h);
                s = std::clamp(s * (1 + k.saturation), 0.0, 1.0);
                v = std::clamp(v * (1 + k.brightness), 0.0, 1.0);
                double r, g, b;
                hsv_to_rgb(h, s, v, r, g, b);
                out.set(x, y, {clamp_byte(r * 255), clamp_byte(g * 255), clamp_byte(b * 255)});
              }
            }
            return out;
          },
          [&](const Invert&) {
            Image out = image;
            for (auto& v : out.pixels()) v = static_cast<std::uint8_t>(255 - v);
            return out;
          },
          [&](const Equalize&) { return equalize(image); },
          [&](const Brightness& k) {
            Image out = image;
            for (auto& v : out.pixels()) v = clamp_byte(v * k.factor);
            return out;
          }},
      kind);
}

Image apply_transform(const Image& image, TransformKind kind) {
  check_transform_dims(kind, image.width(), image.height());
  Image out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      auto [sx, sy] = transform_source(kind, image.width(), image.height(), x, y);
      out.set(x, y, image.at(sx, sy));
    }
  }
  return out;
}

SegMap apply_transform(const SegMap& mask, TransformKind kind) {
  check_transform_dims(kind, mask.width(), mask.height());
  std::vector<ClassId> out(mask.classes().size());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      auto [sx, sy] = transform_source(kind, mask.width(), mask.height(), x, y);
      out[static_cast<std::size_t>(y) * mask.width() + x] = mask.at(sx, sy);
    }
  }
  return SegMap(mask.width(), mask.height(), std::move(out));
}

BinaryMask class_boundary(const SegMap& mask, ClassId class_id) {
  BinaryMask out(mask.width(), mask.height());
  constexpr int dx[4] = {1, -1, 0, 0};
  constexpr int dy[4] = {0, 0, 1, -1};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y) != class_id) continue;
      for (int k = 0; k < 4; ++k) {
        const int nx = x + dx[k];
        const int ny = y + dy[k];
        if (out.contains(nx, ny) && mask.at(nx, ny) != class_id) {
          out.set(x, y);
          break;
        }
      }
    }
  }
  return out;
}

Image render_discriminative(const SegMap& mask, const DiscriminativeKind& kind, const Palette& palette) {
  validate(kind);
  for (ClassId id : mask.present()) {
    if (!palette.covers(id)) throw PaletteError("palette has no colour for class " + std::to_string(id));
  }
  const int w = mask.width();
  const int h = mask.height();
  Image out(w, h, palette.background());
  if (kind.task == DiscriminativeTask::Segmentation) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const ClassId id = mask.at(x, y);
        if (id != kBackground) out.set(x, y, palette.color(id));
      }
    }
    return out;
  }
  for (ClassId id : mask.present()) {
    const Rgb color = palette.color(id);
    switch (kind.task) {
      case DiscriminativeTask::Edges:
        paint(out, dilate_square(class_boundary(mask, id), kind.width), color);
        break;
      case DiscriminativeTask::Boxes: {
        BinaryMask outline(w, h);
        for (const auto& comp : connected_components(mask, id)) {
          const BoundingBox& b = comp.box;
          for (int x = b.x0; x <= b.x1; ++x) {
            outline.set(x, b.y0);
            outline.set(x, b.y1);
          }
          for (int y = b.y0; y <= b.y1; ++y) {
            outline.set(b.x0, y);
            outline.set(b.x1, y);
          }
        }
        paint(out, dilate_square(outline, kind.width), color);
        break;
      }
      case DiscriminativeTask::Skeleton:
        // Thinning is 3x3-local and components are 8-separated, so thinning
        // the whole class equals thinning each component.
        paint(out, dilate_square(medial_axis(class_region(mask, id)), kind.width), color);
        break;
      case DiscriminativeTask::Points:
        for (const auto& comp : connected_components(mask, id)) {
          auto [px, py] = representative_point(comp.pixels);
          paint(out, disc_at(w, h, px, py, kind.width), color);
        }
        break;
      case DiscriminativeTask::Segmentation:
        break;
    }
  }
  return out;
}

SegMap subsample_classes(const SegMap& mask, const std::set<ClassId>& keep) {
  if (keep.empty()) throw ParameterError("class subset must not be empty");
  for (ClassId id : keep) {
    if (!mask.present().contains(id)) {
      throw ParameterError("class " + std::to_string(id) + " is not present in the mask");
    }
  }
  std::vector<ClassId> out(mask.classes().begin(), mask.classes().end());
  for (auto& c : out) {
    if (!keep.contains(c)) c = kBackground;
  }
  return SegMap(mask.width(), mask.height(), std::move(out));
}

SegMap isolate_class(const SegMap& mask, ClassId class_id) {
  std::vector<ClassId> out(mask.classes().begin(), mask.classes().end());
  for (auto& c : out) {
    if (c != class_id) c = kBackground;
  }
  return SegMap(mask.width(), mask.height(), std::move(out));
}

// ---------------------------------------------------------------------------

std::string TaskVariant::label() const {
  switch (family) {
    case Family::Image: return "image";
    case Family::Generative: return taskforge::label(generative);
    case Family::Transform: return taskforge::label(transform);
    case Family::Discriminative: return taskforge::label(discriminative);
  }
  return "?";
}

std::string TaskVariant::bucket() const {
  switch (family) {
    case Family::Image: return "image";
    case Family::Generative: return family_name(generative);
    case Family::Transform: return taskforge::label(transform);
    case Family::Discriminative: return family_name(discriminative.task);
  }
  return "?";
}

std::vector<TaskVariant> enumerate_task_variants(int side, RngState& rng) {
  using F = TaskVariant::Family;
  std::vector<TaskVariant> out;
  out.push_back({F::Image});
  for (int nominal : kSuperResSides) {
    TaskVariant v{F::Generative};
    v.generative = SuperRes{std::max(1, nominal * side / kSuperResReferenceSide)};
    out.push_back(v);
  }
  for (std::size_t family = 1; family < kGenerativeFamilyCount; ++family) {
    TaskVariant v{F::Generative};
    v.generative = sample_generative(family, side, rng);
    out.push_back(v);
  }
  for (std::size_t t = 0; t < kTransformKindCount; ++t) {
    TaskVariant v{F::Transform};
    v.transform = static_cast<TransformKind>(t);
    out.push_back(v);
  }
  for (std::size_t d = 0; d < kDiscriminativeTaskCount; ++d) {
    const auto task = static_cast<DiscriminativeTask>(d);
    if (task == DiscriminativeTask::Segmentation) {
      TaskVariant v{F::Discriminative};
      v.discriminative = {task, 1};
      out.push_back(v);
      continue;
    }
    for (int width : kStrokeWidths) {
      TaskVariant v{F::Discriminative};
      v.discriminative = {task, width};
      out.push_back(v);
    }
  }
  return out;
}

Image render_variant(const TaskVariant& variant, const Image& image, const SegMap& mask,
                     const Palette& palette, RngState& rng) {
  switch (variant.family) {
    case TaskVariant::Family::Image: return image;
    case TaskVariant::Family::Generative: return apply_generative(image, variant.generative, rng);
    case TaskVariant::Family::Transform: return apply_transform(image, variant.transform);
    case TaskVariant::Family::Discriminative: return render_discriminative(mask, variant.discriminative, palette);
  }
  return image;
}

}  // namespace taskforge
