#pragma once

#include <cstdint>
#include <random>

namespace metaod {

/// Seeded random stream with explicit, platform-stable derivations (the
/// standard distributions are implementation-defined; these are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) {
    const double u = (gen_() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
  }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) { return gen_() % n; }

  /// Child stream whose seed mixes this stream's seed with a tag, so
  /// per-background streams do not depend on processing order.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t x = seed ^ (tag + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace metaod
