#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace drtoll {

/// SplitMix64 finalizer; used to derive independent sub-stream seeds.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Folds a list of keys into a master seed, e.g. (seed, row, col) for a grid
/// cell or (cell_seed, sample_index) for one draw.
inline constexpr std::uint64_t derive_seed(std::uint64_t master,
                                           std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(master);
  for (const std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632BE59BD9B4E019ULL));
  return h;
}

/// Thin wrapper over mt19937_64 with portable transforms (the standard
/// distributions are implementation-defined, these are not).
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : eng_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (one value per call).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace drtoll
