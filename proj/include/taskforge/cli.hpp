#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "taskforge/bundle_io.hpp"

namespace taskforge {

// Environment variable naming the default config file.
inline constexpr const char* kConfigEnv = "TASKFORGE_CONFIG";

struct RunConfig {
  std::uint64_t seed = 0;

  struct Paths {
    std::vector<std::filesystem::path> datasets;  // manifest files or their directories
    std::filesystem::path output;
    std::filesystem::path bundles;  // directory of bundle directories, or one bundle (preview)
    std::filesystem::path codebook;
    std::filesystem::path tokens;
    std::filesystem::path predictions;
    friend bool operator==(const Paths&, const Paths&) = default;
  } paths;

  struct Data {
    int side = 200;  // canonical side for loading and fixtures
    int fixture_records = 24;
    int fixture_classes = 3;
    std::string record;  // enrich
    friend bool operator==(const Data&, const Data&) = default;
  } data;

  struct Sampler {
    int image_budget = 30;
    int t_max = 15;
    int n_context_min = 1;
    int n_context_max = 3;
    int bundles = 100;
    friend bool operator==(const Sampler&, const Sampler&) = default;
  } sampler;

  struct Codec {
    std::string kind = "kmeans";  // kmeans | identity
    int vocab_size = 512;
    int patch_side = 16;
    int grid_rows = 12;
    int grid_cols = 12;
    int iterations = 10;
    int max_images = 256;
    friend bool operator==(const Codec&, const Codec&) = default;
  } codec;

  struct Masking {
    std::string strategy = "token";
    double p = 0.15;
    int n_images = 5;
    int k = 1;
    friend bool operator==(const Masking&, const Masking&) = default;
  } masking;

  struct Balance {
    bool task_balancing = true;
    bool dataset_balancing = true;
    bool recolor = false;
    friend bool operator==(const Balance&, const Balance&) = default;
  } balance;

  struct Eval {
    std::string predictor = "copy_baseline";
    int samples_per_task = 200;
    friend bool operator==(const Eval&, const Eval&) = default;
  } eval;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

Json to_json(const RunConfig& config);
// Missing keys keep their defaults. ConfigError naming the key for unknown
// keys or wrongly typed values.
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

// ConfigError whose message starts with the failing field name.
void validate(const RunConfig& config);

// Runs one command line (without the program name). Returns 0 on success, 2
// for usage errors and 1 for validation or runtime failures.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace taskforge
