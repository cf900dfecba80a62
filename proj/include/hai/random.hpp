#pragma once

// Portable sampling helpers. The standard <random> distributions are
// implementation defined, so everything that must reproduce across standard
// libraries goes through these instead.

#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace hai {

// Unbiased integer in [0, bound) by rejection on the top of the range.
template <class Gen>
std::uint64_t uniform_below(Gen& gen, std::uint64_t bound) {
  static_assert(Gen::min() == 0 && Gen::max() == std::numeric_limits<std::uint64_t>::max());
  if (bound == 0) throw std::invalid_argument("uniform_below: zero bound");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = 0;
  do {
    x = gen();
  } while (x >= limit);
  return x % bound;
}

// Uniform double in [0, 1) with 53 random bits.
template <class Gen>
double uniform01(Gen& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Fisher-Yates over [0, n), stopping after the first `k` slots are fixed.
// Returns those k values in shuffle order.
template <class Gen>
std::vector<std::uint32_t> partial_shuffle(Gen& gen, std::uint32_t n, std::uint32_t k) {
  if (k > n) throw std::invalid_argument("partial_shuffle: k exceeds n");
  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0U);
  for (std::uint32_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::uint32_t>(uniform_below(gen, n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

template <class T, class Gen>
void shuffle_in_place(Gen& gen, std::vector<T>& v) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(gen, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Seeded generator for data synthesis and Monte-Carlo trials.
using SeededRng = std::mt19937_64;

// Child seed for trial `index` of a run seeded with `master`; independent of
// how trials are scheduled across threads.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

}  // namespace hai
