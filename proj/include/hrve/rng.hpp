#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace hrve {

/// (base, stream) identifies one realization; the mapping to random numbers
/// is a pure function so samples can be farmed out in any order.
struct RngSeed {
  std::uint64_t base = 0;
  std::uint64_t stream = 0;

  bool operator==(const RngSeed&) const = default;
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based hash of (seed, purpose, counter).
constexpr std::uint64_t hash_counter(const RngSeed& s, std::uint64_t purpose,
                                     std::uint64_t counter) {
  std::uint64_t z = mix64(s.base ^ 0x243f6a8885a308d3ULL);
  z = mix64(z ^ s.stream);
  z = mix64(z ^ (purpose * 0x9e3779b97f4a7c15ULL));
  return mix64(z ^ counter);
}

/// Uniform in (0, 1); never returns 0 so it is safe under log.
constexpr double to_unit_open(std::uint64_t bits) {
  return (double(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal variate at a counter position (Box-Muller on two hashed
/// uniforms).
inline double normal_at(const RngSeed& s, std::uint64_t purpose,
                        std::uint64_t counter) {
  const double u1 = to_unit_open(hash_counter(s, purpose, 2 * counter));
  const double u2 = to_unit_open(hash_counter(s, purpose, 2 * counter + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Sequential generator seeded from a counter position; used where the
/// number of draws is itself random (point processes).
class CounterRng {
public:
  CounterRng(const RngSeed& s, std::uint64_t purpose)
      : seed_(s), purpose_(purpose) {}

  std::uint64_t next_bits() { return hash_counter(seed_, purpose_, counter_++); }
  double uniform() { return to_unit_open(next_bits()); }
  double exponential() { return -std::log(uniform()); }

private:
  RngSeed seed_;
  std::uint64_t purpose_;
  std::uint64_t counter_ = 0;
};

} // namespace hrve
