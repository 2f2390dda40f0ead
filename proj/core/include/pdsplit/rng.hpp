#pragma once

#include <cmath>
#include <cstdint>

namespace pdsplit {

// Counter-based RNG: every draw is a pure hash of (seed, iteration, draw
// index), so a run is reproducible across platforms regardless of how many
// draws earlier iterations consumed.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t draw_u64(std::uint64_t seed, std::uint64_t iteration,
                              std::uint64_t draw) {
  std::uint64_t z = seed;
  z = mix64(z + 0x9E3779B97F4A7C15ULL * (iteration + 1));
  z = mix64(z + 0x85EBCA77C2B2AE63ULL * (draw + 1));
  return mix64(z);
}

// Uniform in [0, 1), 53-bit mantissa.
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace rng

// A stream view over the counter RNG for one (seed, iteration) pair.
// Each call advances the draw index.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t iteration)
      : seed_(seed), iteration_(iteration) {}

  std::uint64_t u64() { return rng::draw_u64(seed_, iteration_, draw_++); }

  double uniform() { return rng::to_unit(u64()); }

  // Uniform index in {0, ..., n-1} (Lemire multiply-shift).
  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t iteration_;
  std::uint64_t draw_ = 0;
};

}  // namespace pdsplit
