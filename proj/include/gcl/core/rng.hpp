#pragma once

// Seeded randomness. Everything random in the library is drawn through these
// helpers so results only depend on explicit seeds and on mt19937_64, whose
// output sequence is fixed by the standard. The std:: distributions are
// avoided because their algorithms are implementation-defined.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace gcl {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a list of keys
/// (epoch, example index, purpose tag, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(base);
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632BE59BD9B4E019ULL));
  return h;
}

inline Engine make_engine(std::uint64_t seed) { return Engine(splitmix64(seed)); }

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

inline double uniform(Engine& eng, double lo, double hi) { return lo + (hi - lo) * uniform01(eng); }

/// Unbiased integer in [0, n).
inline std::uint64_t uniform_index(Engine& eng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % n;
}

/// Integer in [lo, hi] inclusive.
inline long uniform_int(Engine& eng, long lo, long hi) {
  return lo + static_cast<long>(uniform_index(eng, static_cast<std::uint64_t>(hi - lo + 1)));
}

inline bool bernoulli(Engine& eng, double p) { return uniform01(eng) < p; }

template <class T>
void shuffle(std::span<T> xs, Engine& eng) {
  for (std::size_t i = xs.size(); i > 1; --i) {
    const auto j = uniform_index(eng, i);
    std::swap(xs[i - 1], xs[j]);
  }
}

template <class T>
void shuffle(std::vector<T>& xs, Engine& eng) {
  shuffle(std::span<T>(xs), eng);
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Engine& eng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  shuffle(p, eng);
  return p;
}

inline std::vector<std::size_t> invert_permutation(std::span<const std::size_t> p) {
  std::vector<std::size_t> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = i;
  return inv;
}

}  // namespace gcl
