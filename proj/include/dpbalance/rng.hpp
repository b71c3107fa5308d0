#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace dpbalance {

// Deterministic 64-bit generator used everywhere randomness is needed.
//
// State advances with the splitmix64 update (Steele et al.), which is a
// fixed sequence of shifts and multiplies, so runs are reproducible across
// platforms and independent of the C++ standard library. Substreams are
// derived by hashing a label into the seed, which keeps workload, arrival,
// and loss draws independent of one another and of consumption order.
class Rng {
 public:
  Rng() = default;
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Substream for (label, key), e.g. ("workload", round).
  static Rng stream(std::uint64_t seed, std::string_view label, std::uint64_t key);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random mantissa bits.
  double next_double();

  // Uniform in [lo, hi).
  double uniform(double lo, double hi);

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  // True with probability p.
  bool bernoulli(double p);

  // Knuth inversion; fine for the small rates used here.
  int poisson(double rate);

  // Deterministic partial Fisher-Yates: k distinct indices out of [0, n).
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_ = 0x9e3779b97f4a7c15ULL;
};

// One splitmix64 step applied to a value; used to mix seeds and labels.
std::uint64_t mix64(std::uint64_t x);

}  // namespace dpbalance
