#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace omkam {

// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seed of the index-th member of an ensemble drawn under `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

// Stateless normal source keyed by (seed, step, lane). A given key always
// yields the same pair, so the sampled path never depends on evaluation order
// or worker count.
class CounterNormal {
 public:
  explicit constexpr CounterNormal(std::uint64_t seed) : key_(splitmix64(seed)) {}

  // Two independent standard normals for (step, lane) via Box-Muller.
  std::pair<double, double> pair(std::uint64_t step, std::uint64_t lane) const {
    const std::uint64_t z = splitmix64(splitmix64(key_ ^ step) ^ (lane * 0xD6E8FEB86659FD93ULL));
    const std::uint64_t w = splitmix64(z ^ 0xA0761D6478BD642FULL);
    // 53-bit uniforms; u1 in (0, 1] so the log is finite.
    const double u1 = (static_cast<double>(z >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(w >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

  double uniform(std::uint64_t step, std::uint64_t lane) const {
    const std::uint64_t z = splitmix64(splitmix64(key_ ^ step) ^ (lane * 0x9FB21C651E98DF25ULL));
    return static_cast<double>(z >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
};

}  // namespace omkam
