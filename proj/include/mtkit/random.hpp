#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace mtkit {

/// Seeded generator with a portable bounded draw.
///
/// std::uniform_int_distribution is implementation-defined, so draws would
/// differ across standard libraries. mt19937_64's raw output is fixed by the
/// standard and the rejection sampler below is ours, which keeps every seeded
/// selection reproducible everywhere.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound + 1) % bound;
    std::uint64_t x = engine_();
    while (x > limit) x = engine_();
    return x % bound;
  }

  /// Uniform real in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// k distinct indices from [0, n) in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  SeededRng rng(seed);
  for (std::size_t i = 0; i < k && i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(std::min(k, n));
  return perm;
}

/// Derives a stream seed for a sub-task so that parallel work stays deterministic.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace mtkit
