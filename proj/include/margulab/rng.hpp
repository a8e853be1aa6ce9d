#pragma once
#include <cstdint>
#include <random>

namespace ml {

using Rng = std::mt19937_64;

// 53-bit uniform in [0,1), identical on every platform
inline double u01(Rng& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

// independent stream per (seed, index)
inline Rng stream(std::uint64_t seed, std::uint64_t idx) {
  std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                   static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32)};
  return Rng(sq);
}

}  // namespace ml
