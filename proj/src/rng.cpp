#include "dpbalance/rng.hpp"

#include <cmath>

namespace dpbalance {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::stream(std::uint64_t seed, std::string_view label, std::uint64_t key) {
  std::uint64_t h = mix64(seed);
  for (char c : label) {
    h = mix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
  }
  return Rng(mix64(h ^ key));
}

std::uint64_t Rng::next_u64() {
  state_ = mix64(state_);
  return state_;
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  // Rejection step keeps the draw unbiased.
  const std::uint64_t limit = n * ((~0ULL) / n);
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

bool Rng::bernoulli(double p) {
  return next_double() < p;
}

int Rng::poisson(double rate) {
  if (rate <= 0.0) return 0;
  const double threshold = std::exp(-rate);
  int count = 0;
  double product = next_double();
  while (product > threshold) {
    ++count;
    product *= next_double();
  }
  return count;
}

std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  if (k > n) k = n;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(next_below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace dpbalance
