#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace bmi {

// All randomness in the toolkit flows through these helpers instead of
// std::*_distribution, whose output is implementation-defined. mt19937_64 is
// fully specified by the standard, so results are reproducible across
// compilers and platforms.

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

// One root seed per experiment; each stage derives its own stream so that
// adding a stage never perturbs the draws of another.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stage) {
  std::uint64_t z = root ^ fnv1a64(stage);
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Uniform in [lo, hi).
inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * uniform01(gen);
}

// Uniform integer in [0, n). Modulo bias is irrelevant at these ranges and
// keeps the mapping portable.
inline std::uint64_t uniform_index(std::mt19937_64& gen, std::uint64_t n) {
  return n == 0 ? 0 : gen() % n;
}

// Marsaglia polar method; deterministic given the engine state.
inline double gaussian(std::mt19937_64& gen) {
  for (;;) {
    double u = 2.0 * uniform01(gen) - 1.0;
    double v = 2.0 * uniform01(gen) - 1.0;
    double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

template <typename T>
void shuffle_indices(std::vector<T>& items, std::mt19937_64& gen) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_index(gen, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace bmi
