#pragma once

// k-modes clustering, k-NN classification, Rand index and the index
// transposition that maps results on protected records back to plaintext
// record identities.

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hai/bitvector.hpp"
#include "hai/sketch.hpp"

namespace hai {

// Cluster assignment keyed by record index. Entries are kept sorted by index;
// indexes are unique and every cluster id is below k.
class Partition {
 public:
  Partition() = default;
  Partition(std::vector<std::pair<std::uint32_t, std::uint32_t>> assignment, std::uint32_t k);
  // Records 0..n-1 in order.
  static Partition from_clusters(std::span<const std::uint32_t> clusters, std::uint32_t k);

  [[nodiscard]] std::uint32_t k() const noexcept { return k_; }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] std::span<const std::pair<std::uint32_t, std::uint32_t>> entries() const noexcept {
    return entries_;
  }
  [[nodiscard]] std::optional<std::uint32_t> cluster_of(std::uint32_t index) const;
  [[nodiscard]] std::vector<std::uint32_t> cluster_sizes() const;
  // Cluster ids renumbered 0.. in order of first appearance by record index,
  // dropping unused ids.
  [[nodiscard]] Partition compacted() const;

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries_;
  std::uint32_t k_ = 0;
};

enum class EmptyClusterPolicy { ReseedFarthest };

struct KModesConfig {
  std::uint32_t k = 2;
  std::uint32_t iterations = 20;
  std::uint64_t seed = 0;
  SimilarityMeasure distance = SimilarityMeasure::HammingSimilarity;
  EmptyClusterPolicy empty_cluster_policy = EmptyClusterPolicy::ReseedFarthest;
  // When false, all `iterations` rounds run even after assignments settle.
  bool stop_when_stable = true;
  unsigned threads = 1;
};

struct KModesResult {
  Partition partition;
  std::vector<BitVector> centers;
  // Sum of Hamming distances from each record to its assigned center, one
  // entry per assignment pass.
  std::vector<std::uint64_t> objective_trace;
  std::uint32_t iterations_run = 0;
  bool converged = false;
};

// Lloyd-style k-modes. Record i is reported under indexes[i] (or i when
// `indexes` is empty). Throws std::invalid_argument on fewer than k records,
// zero-length or mixed-length vectors, k < 2 or iterations < 1.
[[nodiscard]] KModesResult kmodes(std::span<const BitVector> data, std::span<const std::uint32_t> indexes,
                                  const KModesConfig& cfg);
[[nodiscard]] KModesResult kmodes(std::span<const BitVector> data, const KModesConfig& cfg);

// Index of the most similar center (lowest id on ties).
[[nodiscard]] std::uint32_t nearest_center(const BitVector& x, std::span<const BitVector> centers,
                                           SimilarityMeasure measure);

// Majority label among the k most similar training records. Similarity ties
// prefer the lower training position; vote ties prefer the class whose voters
// have the larger total similarity, then the lower class id.
[[nodiscard]] std::uint32_t knn(std::span<const BitVector> train, std::span<const std::uint32_t> labels,
                                const BitVector& query, std::uint32_t k, SimilarityMeasure measure);

[[nodiscard]] std::vector<std::uint32_t> knn_batch(std::span<const BitVector> train,
                                                   std::span<const std::uint32_t> labels,
                                                   std::span<const BitVector> queries, std::uint32_t k,
                                                   SimilarityMeasure measure, unsigned threads = 1);

// (a + b) / C(n, 2) with a = pairs together in both, b = pairs apart in both.
// Defined as 1 for fewer than two records. Throws std::invalid_argument when
// the record sets differ.
[[nodiscard]] double rand_index(const Partition& p, const Partition& q);

// One class's share of an index transposition: plaintext record indexes[i]
// is published under protected index indexes[permutation(i)].
struct ClassPermutation {
  IndexPermutation permutation;
  std::vector<std::uint32_t> indexes;
};

class IndexTransposition {
 public:
  IndexTransposition() = default;
  explicit IndexTransposition(std::vector<ClassPermutation> classes);

  static IndexTransposition identity(std::span<const std::uint32_t> indexes);

  [[nodiscard]] std::span<const ClassPermutation> classes() const noexcept { return classes_; }
  [[nodiscard]] std::optional<std::uint32_t> to_plain(std::uint32_t protected_index) const;
  [[nodiscard]] std::optional<std::uint32_t> to_protected(std::uint32_t plain_index) const;
  [[nodiscard]] IndexTransposition inverse() const;

 private:
  std::vector<ClassPermutation> classes_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> protected_to_plain_;  // sorted
  std::vector<std::pair<std::uint32_t, std::uint32_t>> plain_to_protected_;  // sorted
};

// Relabels each record of `p` from its protected index to its plaintext
// index. Throws std::invalid_argument for an index not covered by `maps`.
[[nodiscard]] Partition transpose_partition(const Partition& p, const IndexTransposition& maps);

}  // namespace hai
