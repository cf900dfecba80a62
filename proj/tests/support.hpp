#pragma once

// Reference oracles and fixtures shared by the test binaries. The oracles
// work one bit or one pair at a time and share no code with the library.

#include <unistd.h>

#include <cstdint>
#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hai/bitvector.hpp"

namespace hai::test {

using Bits = std::vector<std::uint8_t>;  // one 0/1 entry per bit

inline Bits random_bits(std::mt19937_64& rng, std::size_t n, double p = 0.5) {
  std::bernoulli_distribution coin(p);
  Bits b(n);
  for (auto& x : b) x = coin(rng) ? 1 : 0;
  return b;
}

inline BitVector to_vector(const Bits& b) {
  BitVector v(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i]) v.set(i);
  }
  return v;
}

inline Bits to_bits(const BitVector& v) {
  Bits b(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) b[i] = v.test(i) ? 1 : 0;
  return b;
}

inline std::size_t naive_popcount(const Bits& a) {
  std::size_t c = 0;
  for (auto x : a) c += x;
  return c;
}

inline std::size_t naive_and(const Bits& a, const Bits& b) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < a.size(); ++i) c += a[i] & b[i];
  return c;
}

inline std::size_t naive_hamming(const Bits& a, const Bits& b) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < a.size(); ++i) c += a[i] != b[i];
  return c;
}

// Bit i of the packed form is bit (7 - i % 8) of byte i / 8.
inline Bits naive_decode(const std::vector<std::uint8_t>& bytes, std::size_t n) {
  Bits b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = (bytes[i / 8] >> (7 - i % 8)) & 1;
  return b;
}

// Pair counting over every unordered pair.
inline double naive_rand_index(const std::vector<std::uint32_t>& p, const std::vector<std::uint32_t>& q) {
  const std::size_t n = p.size();
  if (n < 2) return 1.0;
  std::size_t agree = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      ++pairs;
      if ((p[i] == p[j]) == (q[i] == q[j])) ++agree;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(pairs);
}

// All set partitions of n elements as restricted growth strings.
inline std::vector<std::vector<std::uint32_t>> all_partitions(std::size_t n) {
  std::vector<std::vector<std::uint32_t>> out;
  std::vector<std::uint32_t> cur(n, 0);
  auto rec = [&](auto&& self, std::size_t i, std::uint32_t used) -> void {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    for (std::uint32_t c = 0; c <= used && c < n; ++c) {
      cur[i] = c;
      self(self, i + 1, std::max(used, c + 1));
    }
  };
  if (n == 0) return {{}};
  cur[0] = 0;
  rec(rec, 1, 1);
  return out;
}

// Exhaustive scan: stable sort by Hamming distance, majority vote, vote ties
// to the larger summed score of the voters, then the lower label.
template <typename Score>
std::uint32_t naive_knn(const std::vector<Bits>& train, const std::vector<std::uint32_t>& labels,
                        const Bits& query, std::uint32_t k, Score score) {
  std::vector<std::pair<std::size_t, std::uint32_t>> all;  // (distance, position)
  for (std::uint32_t i = 0; i < train.size(); ++i) all.emplace_back(naive_hamming(train[i], query), i);
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::map<std::uint32_t, std::pair<std::uint32_t, double>> votes;  // label -> (votes, score sum)
  for (std::uint32_t i = 0; i < k; ++i) {
    auto& v = votes[labels[all[i].second]];
    v.first += 1;
    v.second += score(all[i].first);
  }
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it) {
    const auto& v = it->second;
    if (v.first > best->second.first || (v.first == best->second.first && v.second > best->second.second)) best = it;
  }
  return best->first;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hai-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace hai::test
