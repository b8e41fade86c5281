#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace cfmdd {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent child seeds so that no
/// two random streams in the pipeline share state.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream identifiers for derived seeds.
enum class Stream : std::uint64_t {
  kTopology = 1,
  kChannels = 2,
  kShadowing = 3,
  kOracle = 4,
  kModelInit = 5,
  kShuffle = 6,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream s) {
  return mix_seed(seed, static_cast<std::uint64_t>(s));
}

/// Circularly-symmetric complex Gaussian with total variance `variance`
/// (real and imaginary parts each variance/2).
inline std::complex<double> draw_cn(Rng& rng, double variance) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = std::sqrt(variance / 2.0);
  const double re = normal(rng);
  const double im = normal(rng);
  return {s * re, s * im};
}

}  // namespace cfmdd
