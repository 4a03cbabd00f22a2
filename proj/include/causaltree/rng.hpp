#pragma once

#include <cstdint>
#include <random>

namespace causaltree {

// splitmix64 step, used to derive independent seeds from a base seed plus
// salts (replication index, stream purpose, ...).
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt_a,
                                 std::uint64_t salt_b = 0) {
  std::uint64_t s = mix_seed(base ^ 0x7f4a7c15ULL);
  s = mix_seed(s ^ mix_seed(salt_a));
  s = mix_seed(s ^ mix_seed(salt_b + 0x2545f4914f6cdd1dULL));
  return s;
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

// Fisher-Yates shuffle with an explicit draw scheme so results depend only on
// the engine stream, not on library internals of std::shuffle.
template <typename It>
void shuffle_indices(It first, It last, std::mt19937_64& eng) {
  const auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(first[i - 1], first[pick(eng)]);
  }
}

}  // namespace causaltree
