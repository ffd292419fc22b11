#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

// Deterministic randomness. Everything here is counter-based (stateless per
// draw) so that curves, probe sets and designs are reproducible bit-for-bit
// from a seed, independent of call order.

namespace boil {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Uniform in [0, 1), 53-bit resolution.
inline double u01_from_bits(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline std::uint64_t hash_doubles(const double* v, int n, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed ^ 0x51700af317093355ULL);
  for (int i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &v[i], sizeof bits);
    h = mix_key(h, bits);
  }
  return h;
}

// Keyed counter RNG: draw i of stream s is a pure function of (key, s, i).
struct CounterRng {
  std::uint64_t key = 0;

  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return u01_from_bits(splitmix64(mix_key(mix_key(key, stream), counter)));
  }

  // Box-Muller; avoids library normal_distribution so results are stable
  // across standard library versions.
  double normal(std::uint64_t stream, std::uint64_t counter) const {
    double u1 = uniform(stream, 2 * counter);
    double u2 = uniform(stream, 2 * counter + 1);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
};

inline double halton(std::uint64_t index, std::uint32_t base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

namespace detail {
inline std::uint32_t nth_prime(int n) {
  static const std::uint32_t primes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                         23, 29, 31, 37, 41, 43, 47, 53};
  return primes[n % 16];
}
}  // namespace detail

// Low-discrepancy points in [0,1)^dims: Halton sequence with a seeded
// Cranley-Patterson rotation so different seeds give different (still
// well-spread) point sets.
inline std::vector<Eigen::VectorXd> low_discrepancy(int count, int dims,
                                                    std::uint64_t seed) {
  CounterRng rng{mix_key(seed, 0x1d15c0ULL)};
  std::vector<double> shift(dims);
  for (int j = 0; j < dims; ++j) shift[j] = rng.uniform(7, j);
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd p(dims);
    for (int j = 0; j < dims; ++j) {
      double v = halton(static_cast<std::uint64_t>(i) + 1, detail::nth_prime(j)) + shift[j];
      p[j] = v - std::floor(v);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

}  // namespace boil
