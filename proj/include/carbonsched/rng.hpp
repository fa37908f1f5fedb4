#pragma once

#include <cstdint>

namespace carbonsched {

// SplitMix64 (Steele, Lea, Vigna). Pinned as the project's random generator:
// the same seed yields the same stream on every platform, which plain
// std::uniform_real_distribution does not guarantee.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in [-1, 1].
  double next_signed_unit() { return 2.0 * next_unit() - 1.0; }

private:
  std::uint64_t state_;
};

// FNV-1a, used to derive per-day seeds from (config seed, date string).
inline std::uint64_t fnv1a64(const char* data, std::size_t len) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace carbonsched
