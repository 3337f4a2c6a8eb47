#pragma once

#include <cmath>
#include <cstdint>

namespace mcd {

// Counter-based generator in the SplitMix64 family. The draw sequence is a
// pure function of (seed, stream), so independent chains get independent
// sub-streams and two sampler variants can replay the same noise.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {
    base_ = mix(mix(seed + 0x9E3779B97F4A7C15ULL) ^ mix(stream + 0xD1B54A32D192ED03ULL));
  }

  std::uint64_t next_u64() {
    return mix(base_ + (++counter_) * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform draw in (0, 1].
  double next_uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (no caching, two uniforms per draw).
  double next_normal() {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Derive a child stream; deterministic in (seed, stream, child).
  RngStream fork(std::uint64_t child) const {
    return RngStream(seed_, mix(stream_ + 0x9E3779B97F4A7C15ULL) + child);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace mcd
