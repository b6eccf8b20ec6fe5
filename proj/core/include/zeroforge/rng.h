#pragma once

#include <cstdint>
#include <random>

namespace zeroforge {

// Well-known stream identifiers used to derive independent generators.
enum class Stream : uint64_t {
  kInit = 1,
  kCamera = 2,
  kNoise = 3,
  kPrompts = 4,
  kEval = 5,
  kEncoder = 6,
};

// Deterministic generator for (seed, index, stream). Independent of call order
// so per-iteration randomness does not depend on scheduling.
std::mt19937_64 MakeStream(uint64_t seed, uint64_t index, Stream stream);

// Uniform double in [0, 1) using the top 53 bits of one draw.
inline double UniformUnit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal draw (Box-Muller on two uniform draws).
double StandardNormal(std::mt19937_64& rng);

}  // namespace zeroforge
