#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "taskforge/codebook.hpp"
#include "taskforge/dataset.hpp"
#include "taskforge/palette.hpp"
#include "taskforge/rng.hpp"
#include "taskforge/task_ops.hpp"

namespace taskforge {

struct BalanceConfig {
  // On: buckets (the raw image plus each task family) are drawn uniformly,
  // or by `bucket_weights` when given. Off: uniform over task variants.
  bool task_balancing = true;
  // On: datasets drawn uniformly. Off: proportional to record count.
  bool dataset_balancing = true;
  // On: every discriminative sample gets a fresh palette. Off: one fixed
  // palette for the whole stream.
  bool recolor = false;
  std::map<std::string, double> bucket_weights;
  double palette_floor = kDefaultPaletteFloor;
};

// One selection made by the stream before rendering.
struct Draw {
  std::size_t dataset = 0;
  std::size_t record = 0;
  std::size_t variant = 0;
};

// Infinite training-sample iterator over records x task variants.
class BalancedStream final : public SampleSource {
 public:
  // ConfigError on an empty dataset list, a dataset with no records, or
  // invalid bucket weights. The raw-image bucket is always present.
  BalancedStream(std::vector<Dataset> datasets, std::vector<TaskVariant> tasks, BalanceConfig config,
                 RngState rng);

  std::optional<Sample> next() override;

  // Selection only, without rendering; advances the stream like next().
  Draw draw();
  Sample render(const Draw& d);

  const std::vector<std::string>& buckets() const { return buckets_; }
  const std::vector<TaskVariant>& variants() const { return variants_; }
  const std::vector<Dataset>& datasets() const { return datasets_; }
  const Palette& fixed() const { return fixed_; }
  // Expected draw probability of each bucket, aligned with buckets().
  std::vector<double> bucket_probabilities() const;

 private:
  std::size_t pick_weighted(const std::vector<double>& cumulative);

  std::vector<Dataset> datasets_;
  std::vector<TaskVariant> variants_;
  BalanceConfig config_;
  RngState rng_;
  std::vector<std::string> buckets_;
  std::vector<std::vector<std::size_t>> bucket_members_;
  std::vector<double> bucket_cumulative_;
  std::vector<double> dataset_cumulative_;
  Palette fixed_;
};

}  // namespace taskforge
