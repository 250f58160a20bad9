#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace heatplan {

/// Seedable generator with a fully specified output sequence.
///
/// The engine is MT19937-64, whose sequence is fixed by the C++ standard. The
/// standard distributions are implementation-defined, so the conversions to
/// doubles, coins and normals are spelled out here to keep results identical
/// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool coin() { return (engine_() >> 63) != 0; }

  /// Uniform integer in [0, n). Multiply-shift on the top 32 bits; n must be < 2^32.
  std::uint64_t below(std::uint64_t n) { return ((engine_() >> 32) * n) >> 32; }

  /// Standard normal via Box-Muller (one value per call, the sine branch is discarded).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer, used to derive independent seeds from tuples of ids.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace heatplan
