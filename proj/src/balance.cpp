#include "taskforge/balance.hpp"

#include <algorithm>
#include <cmath>

#include "taskforge/error.hpp"

namespace taskforge {

namespace {

std::vector<double> cumulative(const std::vector<double>& weights) {
  std::vector<double> out;
  double acc = 0;
  for (double w : weights) out.push_back(acc += w);
  return out;
}

}  // namespace

BalancedStream::BalancedStream(std::vector<Dataset> datasets, std::vector<TaskVariant> tasks,
                               BalanceConfig config, RngState rng)
    : datasets_(std::move(datasets)), config_(std::move(config)), rng_(rng) {
  if (datasets_.empty()) throw ConfigError("balanced stream: no datasets");
  for (const auto& ds : datasets_) {
    if (ds.records.empty()) throw ConfigError("balanced stream: dataset '" + ds.id + "' has no records");
  }

  variants_.push_back(TaskVariant{TaskVariant::Family::Image});
  for (auto& t : tasks) {
    if (t.family != TaskVariant::Family::Image) variants_.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < variants_.size(); ++i) {
    std::string b = variants_[i].bucket();
    auto it = std::find(buckets_.begin(), buckets_.end(), b);
    if (it == buckets_.end()) {
      buckets_.push_back(b);
      bucket_members_.push_back({i});
    } else {
      bucket_members_[static_cast<std::size_t>(it - buckets_.begin())].push_back(i);
    }
  }

  std::vector<double> weights(buckets_.size(), 1.0);
  if (!config_.bucket_weights.empty()) {
    if (!config_.task_balancing) throw ConfigError("balanced stream: bucket weights need task balancing");
    double total = 0;
    for (auto& [name, w] : config_.bucket_weights) {
      if (!(w >= 0)) throw ConfigError("balanced stream: weight for '" + name + "' is negative");
      if (std::find(buckets_.begin(), buckets_.end(), name) == buckets_.end()) {
        throw ConfigError("balanced stream: weight given for inactive bucket '" + name + "'");
      }
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("balanced stream: bucket weights must sum to 1");
    for (std::size_t b = 0; b < buckets_.size(); ++b) {
      auto it = config_.bucket_weights.find(buckets_[b]);
      weights[b] = it == config_.bucket_weights.end() ? 0.0 : it->second;
    }
  } else if (!config_.task_balancing) {
    for (std::size_t b = 0; b < buckets_.size(); ++b) weights[b] = double(bucket_members_[b].size());
  }
  bucket_cumulative_ = cumulative(weights);

  std::vector<double> ds_weights;
  for (const auto& ds : datasets_) ds_weights.push_back(config_.dataset_balancing ? 1.0 : double(ds.records.size()));
  dataset_cumulative_ = cumulative(ds_weights);

  ClassId max_id = 0;
  for (const auto& ds : datasets_) {
    for (const auto& r : ds.records) {
      if (!r->mask.present().empty()) max_id = std::max(max_id, *r->mask.present().rbegin());
    }
  }
  fixed_ = fixed_palette(max_id, config_.palette_floor);
}

std::vector<double> BalancedStream::bucket_probabilities() const {
  std::vector<double> out;
  double prev = 0;
  for (double c : bucket_cumulative_) {
    out.push_back((c - prev) / bucket_cumulative_.back());
    prev = c;
  }
  return out;
}

std::size_t BalancedStream::pick_weighted(const std::vector<double>& cum) {
  double u = rng_.uniform01() * cum.back();
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  auto idx = static_cast<std::size_t>(it - cum.begin());
  return std::min(idx, cum.size() - 1);
}

Draw BalancedStream::draw() {
  Draw d;
  d.dataset = pick_weighted(dataset_cumulative_);
  d.record = rng_.uniform_index(datasets_[d.dataset].records.size());
  const auto& members = bucket_members_[pick_weighted(bucket_cumulative_)];
  d.variant = members[rng_.uniform_index(members.size())];
  return d;
}

Sample BalancedStream::render(const Draw& d) {
  const auto& ds = datasets_.at(d.dataset);
  const auto& rec = *ds.records.at(d.record);
  const auto& variant = variants_.at(d.variant);
  Sample s;
  s.annotation = variant.family == TaskVariant::Family::Discriminative;
  s.bucket = variant.bucket();
  s.variant = variant.label();
  s.dataset_id = ds.id;
  s.record_id = rec.id;
  if (s.annotation && config_.recolor) {
    Palette fresh = sample_palette(rec.mask.present(), rng_, config_.palette_floor);
    s.image = render_variant(variant, rec.image, rec.mask, fresh, rng_);
  } else {
    s.image = render_variant(variant, rec.image, rec.mask, fixed_, rng_);
  }
  return s;
}

std::optional<Sample> BalancedStream::next() { return render(draw()); }

}  // namespace taskforge
