#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace taskforge {

// Counter-based random stream. Every draw is splitmix64(seed, counter), so a
// (seed, position) pair fully determines the remaining sequence and the
// stream is identical on every platform. Distributions are implemented here
// rather than with <random> because the standard distributions are
// implementation-defined.
class RngState {
 public:
  constexpr RngState() = default;
  constexpr explicit RngState(std::uint64_t seed, std::uint64_t position = 0)
      : seed_(seed), position_(position) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

  std::uint64_t next_u64();

  // Uniform integer in [lo, hi] (inclusive). Requires lo <= hi.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Uniform index in [0, n). Requires n > 0.
  std::size_t uniform_index(std::size_t n);
  // Uniform double in [0, 1) with 53 bits of resolution.
  double uniform01();
  double uniform(double lo, double hi);
  bool bernoulli(double p);
  // Standard normal via Box-Muller (one value per call).
  double normal(double mean = 0.0, double stddev = 1.0);

  // Child streams for hierarchical seeding (master -> subcommand -> item).
  // Children depend only on this stream's seed, never on its position.
  RngState derive(std::uint64_t index) const;
  RngState derive(std::string_view label) const;

  friend bool operator==(const RngState&, const RngState&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t position_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

// 64-bit FNV-1a, used to turn labels into stream indices.
std::uint64_t hash_label(std::string_view label);

// Fisher-Yates shuffle driven by an RngState.
template <typename It>
void shuffle(It first, It last, RngState& rng) {
  auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = rng.uniform_index(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace taskforge
