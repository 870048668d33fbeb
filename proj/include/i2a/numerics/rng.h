#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace i2a {

// Seeded pseudo-random stream.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard, so an identical seed yields an identical integer stream on every
// conforming platform. The distributions below are written out by hand rather
// than taken from <random>, whose distribution algorithms are
// implementation-defined.
//
// Independent streams for different purposes (level generation, parameter
// init, action sampling, ...) are derived with split().
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). Unbiased (rejection sampling). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);
  int uniform_int(int n) { return static_cast<int>(uniform_int(static_cast<std::uint64_t>(n))); }
  bool bernoulli(double p) { return uniform() < p; }
  // Standard normal via Box-Muller.
  double normal();
  // Index sampled proportionally to non-negative weights (need not sum to 1).
  int categorical(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_int(static_cast<std::uint64_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Deterministic child stream; depends only on this stream's seed and the tag.
  Rng split(std::uint64_t stream) const;
  Rng split(std::string_view purpose) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
// FNV-1a, used for stream tags and config hashes.
std::uint64_t fnv1a64(std::string_view s);

}  // namespace i2a
