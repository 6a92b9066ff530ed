#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "taskforge/dataset.hpp"
#include "taskforge/palette.hpp"
#include "taskforge/rng.hpp"
#include "taskforge/task_ops.hpp"

namespace taskforge {

inline constexpr int kDefaultTMax = 15;
inline constexpr int kDefaultImageBudget = 30;

enum class OrderingMode { TaskBasis, ClassBasis };

// Grammar: generative* image transforms* discriminative*.
struct TaskStructure {
  std::vector<GenerativeKind> generative;
  std::vector<TransformKind> transforms;
  std::vector<DiscriminativeKind> discriminative;
  OrderingMode ordering = OrderingMode::TaskBasis;
  // One image per kept class and discriminative task instead of one image
  // per task showing all kept classes.
  bool classwise = false;

  // Position of the raw image in a chain.
  std::size_t pivot() const { return generative.size(); }
  // Chain length t for a chain keeping `n_classes` classes.
  std::size_t chain_length(std::size_t n_classes = 1) const;

  friend bool operator==(const TaskStructure&, const TaskStructure&) = default;
};

struct StructureLimits {
  int t_max = kDefaultTMax;
  int max_generative = 4;
  int max_transforms = 4;
  int max_discriminative = 6;
  int min_discriminative = 0;
  double classwise_probability = 0.5;
};

// Empty string when valid, otherwise the first violation.
std::string grammar_violation(const TaskStructure& structure, int t_max);

// Family counts are drawn uniformly and rejected until the chain fits
// t_max; kinds are drawn without replacement within each family.
// SamplerError when the limits exclude every valid structure.
TaskStructure sample_structure(RngState& rng, const StructureLimits& limits, int side);

// What one chain position holds.
struct ChainElement {
  enum class Role { Degraded, Image, Transformed, Discriminative };
  Role role = Role::Image;
  std::size_t task_index = 0;       // index into the structure's family list
  ClassId class_id = kBackground;   // classwise discriminative positions only
  std::string label;
};

std::vector<ChainElement> chain_layout(const TaskStructure& structure, const std::set<ClassId>& keep);

struct ImageChain {
  std::vector<Image> images;
  RecordPtr source;
  std::set<ClassId> keep;
  Palette palette;
  RngState rng;  // stream the chain was realised from

  std::string record_id() const { return source ? source->id : std::string(); }
};

// Realises one chain: the generative stack applied right to left (element i
// is the further-degraded version of element i+1), the raw image at the
// pivot, cumulative transforms, then renderings of the kept mask after the
// full cumulative transform. Generative element i draws from rng.derive(i).
// SamplerError when the chain would exceed t_max.
ImageChain realize_chain(const RecordPtr& record, const TaskStructure& structure, const Palette& palette,
                         const std::set<ClassId>& keep, RngState rng, int t_max = kDefaultTMax);

struct CqoBundle {
  std::vector<ImageChain> context;
  // Held-out chain: its first element is the query Q, the rest is O.
  ImageChain held_out;
  TaskStructure structure;
  Palette palette;
  std::uint64_t seed = 0;

  const Image& query() const { return held_out.images.front(); }
  std::span<const Image> output() const { return std::span(held_out.images).subspan(1); }
  std::size_t chain_length() const { return held_out.images.size(); }
  std::size_t image_count() const;
};

struct SamplerConfig {
  int n_context_min = 1;
  int n_context_max = 3;
  int image_budget = kDefaultImageBudget;
  StructureLimits limits;
  int max_cover_retries = 64;
  int max_attempts = 32;
  double palette_floor = kDefaultPaletteFloor;
};

// Samples one guardrailed bundle. Records of different dataset ids are never
// mixed and no record is used twice within a bundle.
CqoBundle sample_cqo(std::span<const RecordPtr> records, RngState rng, const SamplerConfig& config = {});

// Bundle i is sampled from master.derive(i).
std::vector<CqoBundle> sample_bundles(std::span<const RecordPtr> records, RngState master, std::size_t count,
                                      const SamplerConfig& config = {});

struct GuardrailReport {
  struct Check {
    std::string rule;
    bool passed = true;
    std::string detail;
  };
  std::vector<Check> checks;

  bool all_passed() const;
  const Check* find(const std::string& rule) const;
};

struct GuardrailLimits {
  int t_max = kDefaultTMax;
  int image_budget = kDefaultImageBudget;
};

// Rules: "grammar", "shared_structure", "shared_palette", "class_cover",
// "budget", "composition".
GuardrailReport check_guardrails(const CqoBundle& bundle, const GuardrailLimits& limits = {});

// Classes visible in the discriminative images of a chain, identified by
// exact palette colour.
std::set<ClassId> rendered_classes(const ImageChain& chain, const TaskStructure& structure,
                                   const Palette& palette);

}  // namespace taskforge
