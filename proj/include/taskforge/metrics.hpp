#pragma once

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "taskforge/image.hpp"
#include "taskforge/palette.hpp"
#include "taskforge/sampler.hpp"

namespace taskforge {

enum class MetricKind { IoU, F1, MAE, RMSE, PSNR, MSE };

std::string to_string(MetricKind kind);
// Larger is better for IoU, F1 and PSNR.
bool higher_is_better(MetricKind kind);

// PSNR reported for identical images.
inline constexpr double kPsnrSentinel = 99.0;

// Nearest palette colour per pixel (Euclidean RGB). Ties go to the lowest
// class id; the background loses every tie.
SegMap snap_to_palette(const Image& image, const Palette& palette);

// Mean over the non-background classes present in gt of |pred & gt| /
// |pred | gt|. When gt has no foreground the score is 1 if pred has none
// either, else 0. MetricError on a size mismatch.
double iou(const SegMap& pred, const SegMap& gt);
// Per-class 2TP / (2TP + FP + FN) averaged over the same classes as iou().
double f1(const SegMap& pred, const SegMap& gt);

// Errors on the [0, 1] channel scale over all three channels.
double mae(const Image& pred, const Image& gt);
double mse(const Image& pred, const Image& gt);
double rmse(const Image& pred, const Image& gt);
double psnr(const Image& pred, const Image& gt);

using MetricOperand = std::variant<Image, SegMap>;

// IoU / F1 need SegMaps, the rest images; MetricError otherwise.
double compute_metric(const MetricOperand& pred, const MetricOperand& gt, MetricKind kind);

struct PositionScore {
  std::size_t position = 0;  // chain position (1-based within the chain; 0 is the query)
  std::string task;          // element label
  std::string family;        // aggregation key
  MetricKind metric = MetricKind::MAE;
  double value = 0.0;
};

struct FamilyAggregate {
  std::string family;
  MetricKind metric = MetricKind::MAE;
  double mean = 0.0;
  std::size_t count = 0;
};

struct TaskReport {
  std::vector<PositionScore> positions;

  // Sorted by family then metric.
  std::vector<FamilyAggregate> aggregates() const;
  // Mean of all position scores of one metric; NaN when there are none.
  double mean(MetricKind kind) const;
  std::size_t count(MetricKind kind) const;
};

// Metric kinds scored at one chain position: restored images get PSNR, MAE
// and RMSE, transformed images MSE, segmentation IoU and the thin
// structures F1.
std::vector<MetricKind> metrics_for(const ChainElement& element, const TaskStructure& structure);

// Scores positions 1.. of pred against gt. Discriminative positions are
// snapped to `palette` on both sides first. EvaluationError when the chains
// differ in length or do not match the structure.
TaskReport evaluate_output_sequence(const ImageChain& pred, const ImageChain& gt, const TaskStructure& structure,
                                    const Palette& palette);

}  // namespace taskforge
