#pragma once

// Portable sampling helpers. std::uniform_int_distribution and std::shuffle
// are implementation-defined; these give identical streams on every platform.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace liri {

using Rng = std::mt19937_64;

/// Uniform integer in [0, n) by rejection; n must be > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = 0;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Uniform double in [0, 1) from 53 random bits.
inline double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

/// `count` distinct values from [0, n) in draw order (partial Fisher-Yates).
inline std::vector<std::uint32_t> sample_indices(Rng& rng, std::uint32_t n, std::uint32_t count) {
  std::vector<std::uint32_t> pool(n);
  for (std::uint32_t i = 0; i < n; ++i) pool[i] = i;
  if (count > n) count = n;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto j = i + static_cast<std::uint32_t>(uniform_below(rng, n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace liri
