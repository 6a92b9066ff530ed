#include "taskforge/sampler.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "taskforge/error.hpp"

namespace taskforge {

namespace {

std::vector<DiscriminativeKind> all_discriminative_kinds() {
  std::vector<DiscriminativeKind> out;
  for (std::size_t d = 0; d < kDiscriminativeTaskCount; ++d) {
    const auto task = static_cast<DiscriminativeTask>(d);
    if (task == DiscriminativeTask::Segmentation) {
      out.push_back({task, 1});
    } else {
      for (int w : kStrokeWidths) out.push_back({task, w});
    }
  }
  return out;
}

template <typename T>
std::vector<T> take_shuffled(std::vector<T> pool, std::size_t n, RngState& rng) {
  shuffle(pool.begin(), pool.end(), rng);
  pool.resize(n);
  return pool;
}

std::set<ClassId> random_subset(const std::set<ClassId>& from, std::size_t size, RngState& rng) {
  std::vector<ClassId> pool(from.begin(), from.end());
  auto picked = take_shuffled(std::move(pool), size, rng);
  return {picked.begin(), picked.end()};
}

bool includes(const std::set<ClassId>& outer, const std::set<ClassId>& inner) {
  return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

std::set<ClassId> intersect(const std::set<ClassId>& a, const std::set<ClassId>& b) {
  std::set<ClassId> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

std::string join_ids(const std::set<ClassId>& ids) {
  std::string s = "{";
  for (ClassId id : ids) s += (s.size() > 1 ? "," : "") + std::to_string(id);
  return s + "}";
}

}  // namespace

std::size_t TaskStructure::chain_length(std::size_t n_classes) const {
  const std::size_t disc = classwise ? discriminative.size() * n_classes : discriminative.size();
  return generative.size() + 1 + transforms.size() + disc;
}

std::string grammar_violation(const TaskStructure& s, int t_max) {
  const std::size_t t = s.chain_length(1);
  if (t < 2) return "chain holds only the raw image";
  if (t > static_cast<std::size_t>(t_max)) {
    return "chain length " + std::to_string(t) + " exceeds t_max " + std::to_string(t_max);
  }
  try {
    for (const auto& g : s.generative) validate(g, INT32_MAX / 4, INT32_MAX / 4);
    for (const auto& d : s.discriminative) validate(d);
  } catch (const ParameterError& e) {
    return e.what();
  }
  if (s.classwise && s.discriminative.empty()) return "classwise structure without discriminative tasks";
  return {};
}

TaskStructure sample_structure(RngState& rng, const StructureLimits& limits, int side) {
  const int max_g = std::clamp(limits.max_generative, 0, static_cast<int>(kGenerativeFamilyCount));
  const int max_t = std::clamp(limits.max_transforms, 0, static_cast<int>(kTransformKindCount));
  const auto disc_pool = all_discriminative_kinds();
  const int max_d = std::clamp(limits.max_discriminative, 0, static_cast<int>(disc_pool.size()));
  const int min_d = std::max(0, limits.min_discriminative);
  const bool feasible = limits.t_max >= 2 && min_d <= max_d && 1 + min_d <= limits.t_max &&
                        (min_d >= 1 || max_g + max_t + max_d >= 1);
  if (!feasible) throw SamplerError("structure limits exclude every valid task structure");

  int g = 0, tr = 0, d = 0;
  do {
    g = static_cast<int>(rng.uniform_int(0, max_g));
    tr = static_cast<int>(rng.uniform_int(0, max_t));
    d = static_cast<int>(rng.uniform_int(min_d, max_d));
  } while (g + tr + d == 0 || 1 + g + tr + d > limits.t_max);

  TaskStructure s;
  std::vector<std::size_t> families(kGenerativeFamilyCount);
  std::iota(families.begin(), families.end(), 0);
  for (std::size_t family : take_shuffled(families, g, rng)) {
    s.generative.push_back(sample_generative(family, side, rng));
  }
  std::vector<TransformKind> transforms;
  for (std::size_t k = 0; k < kTransformKindCount; ++k) transforms.push_back(static_cast<TransformKind>(k));
  s.transforms = take_shuffled(transforms, tr, rng);
  s.discriminative = take_shuffled(disc_pool, d, rng);
  s.classwise = d > 0 && rng.bernoulli(limits.classwise_probability);
  s.ordering = rng.bernoulli(0.5) ? OrderingMode::ClassBasis : OrderingMode::TaskBasis;
  return s;
}

std::vector<ChainElement> chain_layout(const TaskStructure& s, const std::set<ClassId>& keep) {
  using Role = ChainElement::Role;
  std::vector<ChainElement> out;
  for (std::size_t i = 0; i < s.generative.size(); ++i) {
    out.push_back({Role::Degraded, i, kBackground, label(s.generative[i])});
  }
  out.push_back({Role::Image, 0, kBackground, "image"});
  for (std::size_t i = 0; i < s.transforms.size(); ++i) {
    out.push_back({Role::Transformed, i, kBackground, label(s.transforms[i])});
  }
  auto disc = [&](std::size_t i, ClassId c) {
    std::string name = label(s.discriminative[i]);
    if (c != kBackground) name += "_c" + std::to_string(c);
    out.push_back({Role::Discriminative, i, c, std::move(name)});
  };
  if (!s.classwise) {
    for (std::size_t i = 0; i < s.discriminative.size(); ++i) disc(i, kBackground);
  } else if (s.ordering == OrderingMode::TaskBasis) {
    for (std::size_t i = 0; i < s.discriminative.size(); ++i) {
      for (ClassId c : keep) disc(i, c);
    }
  } else {
    for (ClassId c : keep) {
      for (std::size_t i = 0; i < s.discriminative.size(); ++i) disc(i, c);
    }
  }
  return out;
}

ImageChain realize_chain(const RecordPtr& record, const TaskStructure& s, const Palette& palette,
                         const std::set<ClassId>& keep, RngState rng, int t_max) {
  if (!record) throw SamplerError("realize_chain needs a source record");
  const bool has_disc = !s.discriminative.empty();
  if (has_disc) {
    if (keep.empty()) throw SamplerError("record '" + record->id + "': empty class subset");
    if (!includes(record->mask.present(), keep)) {
      throw SamplerError("record '" + record->id + "': class subset " + join_ids(keep) +
                         " not present in the mask");
    }
  }
  const std::size_t t = s.chain_length(has_disc ? keep.size() : 1);
  if (t > static_cast<std::size_t>(t_max)) {
    throw SamplerError("chain length " + std::to_string(t) + " exceeds t_max " + std::to_string(t_max));
  }

  ImageChain chain;
  chain.source = record;
  chain.keep = has_disc ? keep : std::set<ClassId>{};
  chain.palette = palette;
  chain.rng = rng;
  chain.images.resize(t);

  const Image& x = record->image;
  Image current = x;
  for (std::size_t i = s.generative.size(); i-- > 0;) {
    RngState op_rng = rng.derive(i);
    current = apply_generative(current, s.generative[i], op_rng);
    chain.images[i] = current;
  }
  std::size_t pos = s.pivot();
  chain.images[pos++] = x;
  current = x;
  for (TransformKind tk : s.transforms) {
    current = apply_transform(current, tk);
    chain.images[pos++] = current;
  }
  if (has_disc) {
    SegMap mask = subsample_classes(record->mask, keep);
    for (TransformKind tk : s.transforms) mask = apply_transform(mask, tk);
    const auto layout = chain_layout(s, keep);
    for (std::size_t p = pos; p < layout.size(); ++p) {
      const ChainElement& e = layout[p];
      const auto& kind = s.discriminative[e.task_index];
      chain.images[p] = e.class_id == kBackground
                            ? render_discriminative(mask, kind, palette)
                            : render_discriminative(isolate_class(mask, e.class_id), kind, palette);
    }
  }
  return chain;
}

std::size_t CqoBundle::image_count() const {
  std::size_t n = held_out.images.size();
  for (const auto& c : context) n += c.images.size();
  return n;
}

CqoBundle sample_cqo(std::span<const RecordPtr> records, RngState rng, const SamplerConfig& config) {
  if (config.n_context_min < 1 || config.n_context_max < config.n_context_min) {
    throw SamplerError("invalid n_context range");
  }
  std::map<std::string, std::vector<RecordPtr>> groups;
  for (const auto& r : records) groups[r->dataset_id].push_back(r);
  std::vector<const std::vector<RecordPtr>*> eligible;
  for (const auto& [id, group] : groups) {
    if (group.size() >= static_cast<std::size_t>(config.n_context_min) + 1) eligible.push_back(&group);
  }
  if (eligible.empty()) {
    throw SamplerError("no dataset has at least " + std::to_string(config.n_context_min + 1) + " records");
  }
  const std::uint64_t bundle_seed = rng.seed();

  std::string last_failure = "no attempt made";
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    const auto& group = *eligible[rng.uniform_index(eligible.size())];
    const int n = static_cast<int>(rng.uniform_int(
        config.n_context_min, std::min<std::int64_t>(config.n_context_max, group.size() - 1)));
    const int t_cap = std::min(config.limits.t_max, config.image_budget / (n + 1));
    if (t_cap < 2) {
      last_failure = "image budget " + std::to_string(config.image_budget) + " cannot hold " +
                     std::to_string(n + 1) + " chains";
      continue;
    }
    StructureLimits limits = config.limits;
    limits.t_max = t_cap;
    const int side = group.front()->image.width();
    TaskStructure structure = sample_structure(rng, limits, side);
    const bool has_disc = !structure.discriminative.empty();

    std::vector<RecordPtr> query_pool;
    for (const auto& r : group) {
      if (!has_disc || !r->mask.present().empty()) query_pool.push_back(r);
    }
    if (query_pool.empty()) {
      last_failure = "no record carries annotated classes";
      continue;
    }
    const RecordPtr query = query_pool[rng.uniform_index(query_pool.size())];

    std::set<ClassId> keep_q;
    if (has_disc) {
      const auto& present = query->mask.present();
      std::size_t max_keep = present.size();
      if (structure.classwise) {
        const std::size_t fixed = structure.chain_length(0);
        const std::size_t room = static_cast<std::size_t>(t_cap) - fixed;
        max_keep = std::min(max_keep, room / structure.discriminative.size());
      }
      if (max_keep == 0) {
        last_failure = "classwise expansion exceeds t_max";
        continue;
      }
      keep_q = random_subset(present, static_cast<std::size_t>(rng.uniform_int(1, max_keep)), rng);
    }

    std::vector<RecordPtr> candidates;
    for (const auto& r : group) {
      if (r == query) continue;
      if (has_disc) {
        const auto overlap = intersect(r->mask.present(), keep_q);
        if (overlap.empty()) continue;
        if (structure.classwise && overlap.size() != keep_q.size()) continue;
      }
      candidates.push_back(r);
    }
    if (candidates.size() < static_cast<std::size_t>(n)) {
      last_failure = "too few context candidates share the query classes";
      continue;
    }
    std::vector<RecordPtr> chosen;
    bool covered = false;
    for (int retry = 0; retry < config.max_cover_retries && !covered; ++retry) {
      chosen = take_shuffled(candidates, n, rng);
      std::set<ClassId> cover;
      for (const auto& r : chosen) {
        const auto overlap = intersect(r->mask.present(), keep_q);
        cover.insert(overlap.begin(), overlap.end());
      }
      covered = includes(cover, keep_q);
    }
    if (!covered) {
      last_failure = "no context subset covers the query classes " + join_ids(keep_q);
      continue;
    }

    Palette palette;
    if (has_disc) palette = sample_palette(keep_q, rng, config.palette_floor);

    CqoBundle bundle;
    bundle.structure = structure;
    bundle.palette = palette;
    bundle.seed = bundle_seed;
    const RngState chain_root = rng.derive("chains");
    for (int i = 0; i < n; ++i) {
      std::set<ClassId> keep_r;
      if (has_disc) keep_r = intersect(chosen[i]->mask.present(), keep_q);
      bundle.context.push_back(realize_chain(chosen[i], structure, palette, keep_r,
                                             chain_root.derive(static_cast<std::uint64_t>(i)), t_cap));
    }
    bundle.held_out = realize_chain(query, structure, palette, keep_q,
                                    chain_root.derive(static_cast<std::uint64_t>(n)), t_cap);
    return bundle;
  }
  throw SamplerError("could not sample a bundle after " + std::to_string(config.max_attempts) +
                     " attempts: " + last_failure);
}

std::vector<CqoBundle> sample_bundles(std::span<const RecordPtr> records, RngState master, std::size_t count,
                                      const SamplerConfig& config) {
  std::vector<CqoBundle> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_cqo(records, master.derive(i), config));
  return out;
}

// ---------------------------------------------------------------------------

bool GuardrailReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const GuardrailReport::Check* GuardrailReport::find(const std::string& rule) const {
  for (const auto& c : checks) {
    if (c.rule == rule) return &c;
  }
  return nullptr;
}

std::set<ClassId> rendered_classes(const ImageChain& chain, const TaskStructure& structure,
                                   const Palette& palette) {
  std::map<Rgb, ClassId> lookup;
  for (const auto& [id, c] : palette.colors()) lookup.emplace(c, id);
  std::set<ClassId> out;
  const auto layout = chain_layout(structure, chain.keep);
  for (std::size_t p = 0; p < layout.size() && p < chain.images.size(); ++p) {
    if (layout[p].role != ChainElement::Role::Discriminative) continue;
    const Image& img = chain.images[p];
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        auto it = lookup.find(img.at(x, y));
        if (it != lookup.end()) out.insert(it->second);
      }
    }
  }
  return out;
}

GuardrailReport check_guardrails(const CqoBundle& bundle, const GuardrailLimits& limits) {
  GuardrailReport report;
  auto add = [&](std::string rule, bool ok, std::string detail = {}) {
    report.checks.push_back({std::move(rule), ok, ok ? std::string() : std::move(detail)});
  };
  const TaskStructure& s = bundle.structure;
  std::vector<const ImageChain*> chains;
  for (const auto& c : bundle.context) chains.push_back(&c);
  chains.push_back(&bundle.held_out);

  // grammar
  const std::string violation = grammar_violation(s, limits.t_max);
  add("grammar", violation.empty(), violation);

  // shared_structure: one chain length t for every chain, each matching the
  // layout implied by the structure and its class subset.
  {
    bool ok = true;
    std::string detail;
    const std::size_t t = bundle.held_out.images.size();
    for (std::size_t i = 0; i < chains.size() && ok; ++i) {
      const auto& c = *chains[i];
      const std::size_t expected = chain_layout(s, c.keep).size();
      if (c.images.size() != expected || c.images.size() != t) {
        ok = false;
        detail = "chain " + std::to_string(i) + " has " + std::to_string(c.images.size()) +
                 " images, expected " + std::to_string(expected) + " and shared t=" + std::to_string(t);
      }
      for (const auto& img : c.images) {
        if (img.width() != bundle.query().width() || img.height() != bundle.query().height()) {
          ok = false;
          detail = "chain " + std::to_string(i) + " mixes image dimensions";
          break;
        }
      }
    }
    if (t > static_cast<std::size_t>(limits.t_max)) {
      ok = false;
      detail = "t=" + std::to_string(t) + " exceeds t_max";
    }
    add("shared_structure", ok, detail);
  }

  // shared_palette: one palette object and only its colours in annotations.
  {
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < chains.size() && ok; ++i) {
      const auto& c = *chains[i];
      if (!(c.palette == bundle.palette)) {
        ok = false;
        detail = "chain " + std::to_string(i) + " carries a different palette";
        break;
      }
      std::set<Rgb> allowed{bundle.palette.background()};
      for (ClassId id : c.keep) {
        if (!bundle.palette.covers(id)) {
          ok = false;
          detail = "palette lacks class " + std::to_string(id);
          break;
        }
        allowed.insert(bundle.palette.color(id));
      }
      const auto layout = chain_layout(s, c.keep);
      for (std::size_t p = 0; p < layout.size() && p < c.images.size() && ok; ++p) {
        if (layout[p].role != ChainElement::Role::Discriminative) continue;
        const Image& img = c.images[p];
        for (int y = 0; y < img.height() && ok; ++y) {
          for (int x = 0; x < img.width(); ++x) {
            if (!allowed.contains(img.at(x, y))) {
              ok = false;
              detail = "chain " + std::to_string(i) + " position " + std::to_string(p) +
                       " uses a colour outside the shared palette";
              break;
            }
          }
        }
      }
    }
    add("shared_palette", ok, detail);
  }

  // class_cover: classes(O) within classes(C), by metadata and by pixels.
  {
    std::set<ClassId> ctx_keep, ctx_seen;
    for (const auto& c : bundle.context) {
      ctx_keep.insert(c.keep.begin(), c.keep.end());
      const auto seen = rendered_classes(c, s, bundle.palette);
      ctx_seen.insert(seen.begin(), seen.end());
    }
    const auto out_seen = rendered_classes(bundle.held_out, s, bundle.palette);
    const bool by_keep = includes(ctx_keep, bundle.held_out.keep);
    const bool by_pixels = includes(ctx_seen, out_seen);
    add("class_cover", by_keep && by_pixels,
        "output classes " + join_ids(by_keep ? out_seen : bundle.held_out.keep) + " not covered by context " +
            join_ids(by_keep ? ctx_seen : ctx_keep));
  }

  // budget
  {
    const std::size_t total = bundle.image_count();
    const bool ok = !bundle.context.empty() && total <= static_cast<std::size_t>(limits.image_budget);
    add("budget", ok,
        bundle.context.empty() ? "bundle has no context chain"
                               : std::to_string(total) + " images exceed budget " +
                                     std::to_string(limits.image_budget));
  }

  // composition: re-derive the held-out chain and compare bit-exactly.
  {
    bool ok = false;
    std::string detail;
    try {
      const auto& h = bundle.held_out;
      ImageChain again = realize_chain(h.source, s, bundle.palette, h.keep, h.rng, limits.t_max);
      ok = again.images == h.images;
      if (!ok) detail = "re-derived held-out chain differs from the stored one";
    } catch (const Error& e) {
      detail = e.what();
    }
    add("composition", ok, detail);
  }
  return report;
}

}  // namespace taskforge
