#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "nklm/errors.hpp"

namespace nklm {

// Deterministic random source. All sampling goes through explicit helpers
// instead of std::uniform_*_distribution so that streams are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw DomainError("Rng::below: n must be positive");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Pick one element.
  template <typename T>
  const T& choice(const std::vector<T>& v) {
    if (v.empty()) throw DomainError("Rng::choice: empty vector");
    return v[below(v.size())];
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace nklm
