#pragma once

#include <cstdint>

namespace shotlog {

// SplitMix64 finalizer.
constexpr std::uint64_t mix_seed(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Independent child seed for stream `index` of a root seed.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept {
  return mix_seed(mix_seed(root) ^ mix_seed(index + 0x632BE59BD9B4E019ULL));
}

} // namespace shotlog
