#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cgp {

/// 64-bit Mersenne twister; every engine takes one by reference and owns
/// no other randomness.
using Rng = std::mt19937_64;

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Independent stream for replicate `index` of an experiment seeded with
/// `seed`. The result depends only on (seed, index).
inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (0xD1B54A32D192ED03ULL * (index + 1));
  std::seed_seq seq{static_cast<std::uint32_t>(detail::splitmix64(s)),
                    static_cast<std::uint32_t>(detail::splitmix64(s)),
                    static_cast<std::uint32_t>(detail::splitmix64(s)),
                    static_cast<std::uint32_t>(detail::splitmix64(s)),
                    static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform on (0, 1).
inline double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard exponential variate.
inline double exp1(Rng& rng) { return -std::log(uniform_open(rng)); }

inline double exponential(Rng& rng, double rate) { return exp1(rng) / rate; }

inline long long poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<long long> d(mean);
  return d(rng);
}

}  // namespace cgp
