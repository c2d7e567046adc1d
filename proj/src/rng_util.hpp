#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace efr::detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// mt19937_64 engine with explicit inverse-CDF transforms, so streams are
// identical across standard library implementations.
struct Rng {
  std::mt19937_64 engine;
  explicit Rng(std::uint64_t seed) : engine(seed) {}

  double uniform() { return (engine() >> 11) * 0x1.0p-53; }  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }
  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(uniform() * (hi - lo + 1));
  }
  // index with probability weights[k] / total
  int pick(const std::vector<double>& weights, double total) {
    double u = uniform() * total;
    for (size_t k = 0; k + 1 < weights.size(); ++k) {
      u -= weights[k];
      if (u < 0.0) return static_cast<int>(k);
    }
    return static_cast<int>(weights.size()) - 1;
  }
};

}  // namespace efr::detail
