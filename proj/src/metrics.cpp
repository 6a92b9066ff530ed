#include "taskforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "taskforge/error.hpp"

namespace taskforge {

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::IoU: return "iou";
    case MetricKind::F1: return "f1";
    case MetricKind::MAE: return "mae";
    case MetricKind::RMSE: return "rmse";
    case MetricKind::PSNR: return "psnr";
    case MetricKind::MSE: return "mse";
  }
  return "?";
}

bool higher_is_better(MetricKind kind) {
  return kind == MetricKind::IoU || kind == MetricKind::F1 || kind == MetricKind::PSNR;
}

SegMap snap_to_palette(const Image& image, const Palette& palette) {
  std::vector<std::pair<ClassId, Rgb>> entries(palette.colors().begin(), palette.colors().end());
  std::unordered_map<std::uint32_t, ClassId> cache;
  std::vector<ClassId> out(static_cast<std::size_t>(image.width()) * image.height());
  std::size_t i = 0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x, ++i) {
      Rgb c = image.at(x, y);
      std::uint32_t key = std::uint32_t(c.r) << 16 | std::uint32_t(c.g) << 8 | c.b;
      auto it = cache.find(key);
      if (it != cache.end()) {
        out[i] = it->second;
        continue;
      }
      int best = std::numeric_limits<int>::max();
      ClassId arg = kBackground;
      for (const auto& [id, color] : entries) {
        int d = squared_distance(c, color);
        if (d < best) {
          best = d;
          arg = id;
        }
      }
      if (squared_distance(c, palette.background()) < best) arg = kBackground;
      cache.emplace(key, arg);
      out[i] = arg;
    }
  }
  return SegMap(image.width(), image.height(), std::move(out));
}

namespace {

void check_dims(int w1, int h1, int w2, int h2) {
  if (w1 != w2 || h1 != h2) {
    throw MetricError("dimension mismatch: " + std::to_string(w1) + "x" + std::to_string(h1) + " vs " +
                      std::to_string(w2) + "x" + std::to_string(h2));
  }
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

std::map<ClassId, Counts> class_counts(const SegMap& pred, const SegMap& gt) {
  check_dims(pred.width(), pred.height(), gt.width(), gt.height());
  std::map<ClassId, Counts> counts;
  for (ClassId c : gt.present()) counts[c];
  auto p = pred.classes();
  auto g = gt.classes();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == g[i]) {
      if (g[i] != kBackground) ++counts[g[i]].tp;
      continue;
    }
    if (g[i] != kBackground) ++counts[g[i]].fn;
    if (p[i] != kBackground) {
      auto it = counts.find(p[i]);
      if (it != counts.end()) ++it->second.fp;
    }
  }
  return counts;
}

template <typename Score>
double class_mean(const SegMap& pred, const SegMap& gt, Score score) {
  auto counts = class_counts(pred, gt);
  if (counts.empty()) return pred.present().empty() ? 1.0 : 0.0;
  double total = 0;
  for (const auto& [id, c] : counts) total += score(c);
  return total / double(counts.size());
}

std::uint64_t squared_error_sum(const Image& a, const Image& b) {
  check_dims(a.width(), a.height(), b.width(), b.height());
  std::uint64_t sum = 0;
  auto pa = a.pixels();
  auto pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    std::int64_t d = std::int64_t(pa[i]) - std::int64_t(pb[i]);
    sum += static_cast<std::uint64_t>(d * d);
  }
  return sum;
}

}  // namespace

double iou(const SegMap& pred, const SegMap& gt) {
  return class_mean(pred, gt, [](const Counts& c) {
    double denom = double(c.tp + c.fp + c.fn);
    return denom == 0 ? 0.0 : double(c.tp) / denom;
  });
}

double f1(const SegMap& pred, const SegMap& gt) {
  return class_mean(pred, gt, [](const Counts& c) {
    double denom = double(2 * c.tp + c.fp + c.fn);
    return denom == 0 ? 0.0 : double(2 * c.tp) / denom;
  });
}

double mae(const Image& pred, const Image& gt) {
  check_dims(pred.width(), pred.height(), gt.width(), gt.height());
  std::uint64_t sum = 0;
  auto pa = pred.pixels();
  auto pb = gt.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) sum += static_cast<std::uint64_t>(std::abs(int(pa[i]) - int(pb[i])));
  if (pa.empty()) return 0.0;
  return double(sum) / (255.0 * double(pa.size()));
}

double mse(const Image& pred, const Image& gt) {
  std::uint64_t sum = squared_error_sum(pred, gt);
  if (pred.pixels().empty()) return 0.0;
  return double(sum) / (255.0 * 255.0 * double(pred.pixels().size()));
}

double rmse(const Image& pred, const Image& gt) { return std::sqrt(mse(pred, gt)); }

double psnr(const Image& pred, const Image& gt) {
  double m = mse(pred, gt);
  if (m == 0.0) return kPsnrSentinel;
  return 10.0 * std::log10(1.0 / m);
}

double compute_metric(const MetricOperand& pred, const MetricOperand& gt, MetricKind kind) {
  const bool seg = kind == MetricKind::IoU || kind == MetricKind::F1;
  if (seg) {
    const auto* p = std::get_if<SegMap>(&pred);
    const auto* g = std::get_if<SegMap>(&gt);
    if (!p || !g) throw MetricError(to_string(kind) + " needs class maps");
    return kind == MetricKind::IoU ? iou(*p, *g) : f1(*p, *g);
  }
  const auto* p = std::get_if<Image>(&pred);
  const auto* g = std::get_if<Image>(&gt);
  if (!p || !g) throw MetricError(to_string(kind) + " needs images");
  switch (kind) {
    case MetricKind::MAE: return mae(*p, *g);
    case MetricKind::RMSE: return rmse(*p, *g);
    case MetricKind::PSNR: return psnr(*p, *g);
    case MetricKind::MSE: return mse(*p, *g);
    default: break;
  }
  throw MetricError("unsupported metric");
}

std::vector<FamilyAggregate> TaskReport::aggregates() const {
  std::map<std::pair<std::string, MetricKind>, std::pair<double, std::size_t>> acc;
  for (const auto& p : positions) {
    auto& a = acc[{p.family, p.metric}];
    a.first += p.value;
    ++a.second;
  }
  std::vector<FamilyAggregate> out;
  for (const auto& [key, a] : acc) out.push_back({key.first, key.second, a.first / double(a.second), a.second});
  return out;
}

double TaskReport::mean(MetricKind kind) const {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& p : positions) {
    if (p.metric == kind) {
      sum += p.value;
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / double(n);
}

std::size_t TaskReport::count(MetricKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(positions.begin(), positions.end(), [&](const PositionScore& p) { return p.metric == kind; }));
}

namespace {

std::string element_family(const ChainElement& e, const TaskStructure& s) {
  switch (e.role) {
    case ChainElement::Role::Degraded: return family_name(s.generative.at(e.task_index));
    case ChainElement::Role::Image: return "image";
    case ChainElement::Role::Transformed: return label(s.transforms.at(e.task_index));
    case ChainElement::Role::Discriminative: return family_name(s.discriminative.at(e.task_index).task);
  }
  return "?";
}

}  // namespace

std::vector<MetricKind> metrics_for(const ChainElement& e, const TaskStructure& s) {
  switch (e.role) {
    case ChainElement::Role::Degraded:
    case ChainElement::Role::Image: return {MetricKind::PSNR, MetricKind::MAE, MetricKind::RMSE};
    case ChainElement::Role::Transformed: return {MetricKind::MSE};
    case ChainElement::Role::Discriminative:
      return {s.discriminative.at(e.task_index).task == DiscriminativeTask::Segmentation ? MetricKind::IoU
                                                                                       : MetricKind::F1};
  }
  return {};
}

TaskReport evaluate_output_sequence(const ImageChain& pred, const ImageChain& gt, const TaskStructure& structure,
                                    const Palette& palette) {
  if (pred.images.size() != gt.images.size()) {
    throw EvaluationError("predicted chain has " + std::to_string(pred.images.size()) + " images, ground truth " +
                          std::to_string(gt.images.size()));
  }
  auto layout = chain_layout(structure, gt.keep);
  if (layout.size() != gt.images.size()) throw EvaluationError("ground-truth chain does not match the structure");
  TaskReport report;
  for (std::size_t p = 1; p < gt.images.size(); ++p) {
    const auto& e = layout[p];
    const Image& pi = pred.images[p];
    const Image& gi = gt.images[p];
    if (pi.width() != gi.width() || pi.height() != gi.height()) {
      throw EvaluationError("position " + std::to_string(p) + ": predicted image has the wrong size");
    }
    std::string family = element_family(e, structure);
    if (e.role == ChainElement::Role::Discriminative) {
      SegMap ps = snap_to_palette(pi, palette);
      SegMap gs = snap_to_palette(gi, palette);
      for (auto kind : metrics_for(e, structure)) {
        report.positions.push_back({p, e.label, family, kind, compute_metric(ps, gs, kind)});
      }
    } else {
      for (auto kind : metrics_for(e, structure)) {
        report.positions.push_back({p, e.label, family, kind, compute_metric(pi, gi, kind)});
      }
    }
  }
  return report;
}

}  // namespace taskforge
