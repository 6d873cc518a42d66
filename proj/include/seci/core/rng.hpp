#pragma once

#include <cmath>
#include <cstdint>

#include "seci/core/common.hpp"

namespace seci {

// Counter-based generator: every draw is a pure function of
// (seed, stream, counter), so any sample can be regenerated in isolation and
// results do not depend on evaluation order.
struct CounterRng {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t bits(std::uint64_t counter) const {
    std::uint64_t h = mix(seed ^ 0x2545f4914f6cdd1dULL);
    h = mix(h ^ stream);
    return mix(h ^ counter);
  }

  // Uniform on (0,1): top 53 bits, offset by half an ulp so 0 never occurs.
  double uniform(std::uint64_t counter) const {
    return (double(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; counters 2c and 2c+1 feed draw c.
  double normal(std::uint64_t counter) const {
    double u1 = uniform(2 * counter);
    double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }
};

}  // namespace seci
