#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "taskforge/bundle_io.hpp"
#include "taskforge/codebook.hpp"
#include "taskforge/dataset.hpp"
#include "taskforge/metrics.hpp"
#include "taskforge/sampler.hpp"
#include "taskforge/task_ops.hpp"

namespace taskforge {

enum class ColorProtocol { Fixed, Random };
std::string to_string(ColorProtocol protocol);

struct UpperBoundRow {
  std::string dataset;
  std::string task;    // variant label
  std::string family;  // variant bucket
  ColorProtocol protocol = ColorProtocol::Fixed;
  MetricKind metric = MetricKind::MAE;
  double value = 0.0;  // mean over samples
  std::size_t samples = 0;
};

struct UpperBoundReport {
  std::string codebook;
  std::vector<UpperBoundRow> rows;

  const UpperBoundRow* find(const std::string& task, ColorProtocol protocol, MetricKind metric) const;
  std::string to_tsv() const;
  Json to_json() const;
};

struct UpperBoundConfig {
  std::size_t samples_per_task = 200;
  double palette_floor = kDefaultPaletteFloor;
};

// Encode-decode-score of rendered task outputs. Sample s of every task uses
// the same record for both protocols; Fixed renders with one palette for the
// whole dataset, Random with a fresh palette per sample. Annotations are
// snapped and scored with IoU (segmentation) or F1 (thin structures), images
// with MAE. ConfigError for an empty dataset.
UpperBoundReport codebook_upper_bound(const Codebook& codebook, const Dataset& dataset,
                                      const std::vector<TaskVariant>& tasks, ColorProtocol protocol, RngState rng,
                                      const UpperBoundConfig& config = {});
// Both protocols, Fixed rows first.
UpperBoundReport codebook_upper_bound(const Codebook& codebook, const Dataset& dataset,
                                      const std::vector<TaskVariant>& tasks, RngState rng,
                                      const UpperBoundConfig& config = {});

// Picks a context chain uniformly and returns it with the bundle's query in
// front, so positions 1.. align with the held-out chain. SamplerError when the
// bundle has no context.
ImageChain copy_baseline_predict(const CqoBundle& bundle, RngState rng);

enum class Predictor { GroundTruth, CopyBaseline, Tokens };
std::string to_string(Predictor predictor);
Predictor parse_predictor(const std::string& name);

struct EvalConfig {
  std::filesystem::path bundles;  // directory of bundle directories
  std::filesystem::path output;
  Predictor predictor = Predictor::CopyBaseline;
  std::filesystem::path predictions;  // token file (Tokens)
  std::filesystem::path codebook;     // codebook file (Tokens)
  std::uint64_t seed = 0;
};

struct EvalRow {
  std::string bundle;
  std::size_t chain_length = 0;
  TaskReport report;
};

struct EvalResult {
  std::vector<EvalRow> rows;  // sorted by bundle name
  TaskReport combined;
};

// Evaluates every bundle directory under config.bundles. For Tokens the
// token file holds one record per bundle (named like the directory) whose
// Output images are the prediction. IoError for missing inputs,
// EvaluationError for an empty bundle directory or a missing prediction.
EvalResult evaluate_bundles(const EvalConfig& config);

// evaluate_bundles, then writes eval_report.tsv (one row per bundle, then
// one row per family and metric) and eval_report.json. Nothing is written
// when evaluation fails.
EvalResult run_eval(const EvalConfig& config);

std::string eval_report_tsv(const EvalResult& result);
Json eval_report_json(const EvalResult& result, const EvalConfig& config);

}  // namespace taskforge
