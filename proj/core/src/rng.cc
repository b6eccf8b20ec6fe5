#include "zeroforge/rng.h"

#include <cmath>
#include <numbers>

namespace zeroforge {

namespace {

uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::mt19937_64 MakeStream(uint64_t seed, uint64_t index, Stream stream) {
  uint64_t h = SplitMix64(seed);
  h = SplitMix64(h ^ index);
  h = SplitMix64(h ^ static_cast<uint64_t>(stream));
  return std::mt19937_64(h);
}

double StandardNormal(std::mt19937_64& rng) {
  double u1 = UniformUnit(rng);
  double u2 = UniformUnit(rng);
  // u1 in (0,1] to keep the log finite.
  u1 = 1.0 - u1;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace zeroforge
