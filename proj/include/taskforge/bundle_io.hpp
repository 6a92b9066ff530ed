#pragma once

#include <filesystem>

#include <json.hpp>

#include "taskforge/palette.hpp"
#include "taskforge/rng.hpp"
#include "taskforge/sampler.hpp"
#include "taskforge/task_ops.hpp"

namespace taskforge {

using Json = nlohmann::json;

Json to_json(const GenerativeKind& kind);
Json to_json(TransformKind kind);
Json to_json(const DiscriminativeKind& kind);
Json to_json(const TaskStructure& structure);
Json to_json(const Palette& palette);
Json to_json(const RngState& rng);

// Inverse conversions; ValidationError on malformed input.
GenerativeKind generative_from_json(const Json& j);
TransformKind transform_from_json(const Json& j);
DiscriminativeKind discriminative_from_json(const Json& j);
TaskStructure structure_from_json(const Json& j);
Palette palette_from_json(const Json& j);
RngState rng_from_json(const Json& j);

std::string to_string(OrderingMode mode);

// Bundle directory layout:
//   descriptor.json                       structure, palette, seed, chains
//   chain_<i>/<j>.png                     context chains, then the held-out one
//   sources/<record>/{image,mask}.png     source records
// The sources make a bundle self-contained, so guardrails (including the
// composition re-derivation) can be checked after reading it back.
void write_bundle(const CqoBundle& bundle, const std::filesystem::path& dir);
CqoBundle read_bundle(const std::filesystem::path& dir);

}  // namespace taskforge
