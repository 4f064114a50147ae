#pragma once

#include <cstdint>

namespace evtrojan {

// splitmix64 finalizer; derives independent child seeds from (parent, tag).
constexpr std::uint64_t mix_seed(std::uint64_t parent, std::uint64_t tag) noexcept {
  std::uint64_t z = parent + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace evtrojan
