#include "hai/ml.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "hai/parallel.hpp"
#include "hai/random.hpp"

namespace hai {
namespace {

using Entry = std::pair<std::uint32_t, std::uint32_t>;

std::optional<std::uint32_t> lookup(const std::vector<Entry>& sorted, std::uint32_t key) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), Entry{key, 0},
                             [](const Entry& a, const Entry& b) { return a.first < b.first; });
  if (it == sorted.end() || it->first != key) return std::nullopt;
  return it->second;
}

// Score used for assignment; larger is closer.
inline std::int64_t fast_score(SimilarityMeasure m, const BitVector& x, const BitVector& c) {
  switch (m) {
    case SimilarityMeasure::HammingSimilarity:
    case SimilarityMeasure::Euclidean:
      return -static_cast<std::int64_t>(hamming(x, c));
    case SimilarityMeasure::AndCount:
      return static_cast<std::int64_t>(and_similarity(x, c));
    case SimilarityMeasure::Cosine:
      break;
  }
  return std::numeric_limits<std::int64_t>::min();
}

std::uint64_t choose2(std::uint64_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

}  // namespace

unsigned resolve_threads(unsigned requested) noexcept {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HAI_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v <= 1024) return static_cast<unsigned>(v);
  }
  return 1;
}

Partition::Partition(std::vector<Entry> assignment, std::uint32_t k) : entries_(std::move(assignment)), k_(k) {
  std::sort(entries_.begin(), entries_.end());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i > 0 && entries_[i].first == entries_[i - 1].first) {
      throw std::invalid_argument("Partition: record index " + std::to_string(entries_[i].first) +
                                  " assigned twice");
    }
    if (entries_[i].second >= k_) {
      throw std::invalid_argument("Partition: cluster id " + std::to_string(entries_[i].second) +
                                  " not below k = " + std::to_string(k_));
    }
  }
}

Partition Partition::from_clusters(std::span<const std::uint32_t> clusters, std::uint32_t k) {
  std::vector<Entry> e(clusters.size());
  for (std::uint32_t i = 0; i < clusters.size(); ++i) e[i] = {i, clusters[i]};
  return Partition(std::move(e), k);
}

std::optional<std::uint32_t> Partition::cluster_of(std::uint32_t index) const { return lookup(entries_, index); }

std::vector<std::uint32_t> Partition::cluster_sizes() const {
  std::vector<std::uint32_t> sizes(k_, 0);
  for (const auto& [idx, c] : entries_) ++sizes[c];
  return sizes;
}

Partition Partition::compacted() const {
  std::map<std::uint32_t, std::uint32_t> relabel;
  std::vector<Entry> out;
  out.reserve(entries_.size());
  for (const auto& [idx, c] : entries_) {
    auto [it, inserted] = relabel.try_emplace(c, static_cast<std::uint32_t>(relabel.size()));
    out.emplace_back(idx, it->second);
  }
  return Partition(std::move(out), static_cast<std::uint32_t>(relabel.size()));
}

std::uint32_t nearest_center(const BitVector& x, std::span<const BitVector> centers, SimilarityMeasure measure) {
  std::uint32_t best = 0;
  if (measure == SimilarityMeasure::Cosine) {
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::uint32_t c = 0; c < centers.size(); ++c) {
      const double s = similarity(measure, x, centers[c]);
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    return best;
  }
  std::int64_t best_score = std::numeric_limits<std::int64_t>::min();
  for (std::uint32_t c = 0; c < centers.size(); ++c) {
    const std::int64_t s = fast_score(measure, x, centers[c]);
    if (s > best_score) {
      best_score = s;
      best = c;
    }
  }
  return best;
}

KModesResult kmodes(std::span<const BitVector> data, const KModesConfig& cfg) {
  return kmodes(data, {}, cfg);
}

KModesResult kmodes(std::span<const BitVector> data, std::span<const std::uint32_t> indexes,
                    const KModesConfig& cfg) {
  if (cfg.k < 2) throw std::invalid_argument("kmodes: k must be at least 2");
  if (cfg.iterations < 1) throw std::invalid_argument("kmodes: iterations must be at least 1");
  if (data.size() < cfg.k) {
    throw std::invalid_argument("kmodes: " + std::to_string(data.size()) + " records for k = " +
                                std::to_string(cfg.k));
  }
  if (!indexes.empty() && indexes.size() != data.size()) {
    throw std::invalid_argument("kmodes: index list length differs from record count");
  }
  const std::size_t bits = data.front().size();
  if (bits == 0) throw std::invalid_argument("kmodes: zero-length vectors");
  for (const auto& r : data) {
    if (r.size() != bits) throw std::invalid_argument("kmodes: records have different lengths");
  }

  const std::size_t n = data.size();
  const unsigned threads = std::max(1U, cfg.threads);
  SeededRng rng(cfg.seed);
  const auto init = partial_shuffle(rng, static_cast<std::uint32_t>(n), cfg.k);

  KModesResult result;
  result.centers.reserve(cfg.k);
  for (auto i : init) result.centers.push_back(data[i]);

  std::vector<std::uint32_t> assign(n, 0);
  std::vector<std::uint32_t> previous;
  std::vector<std::uint64_t> dist(n, 0);

  for (std::uint32_t it = 0; it < cfg.iterations; ++it) {
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        assign[i] = nearest_center(data[i], result.centers, cfg.distance);
        dist[i] = hamming(data[i], result.centers[assign[i]]);
      }
    });
    std::uint64_t objective = 0;
    for (auto d : dist) objective += d;
    result.objective_trace.push_back(objective);
    result.iterations_run = it + 1;

    const bool stable = !previous.empty() && previous == assign;
    previous = assign;

    // Center update: per-cluster bit counts. Each chunk counts into its own
    // accumulators; merging integer counts is order independent.
    const std::size_t chunks = std::min<std::size_t>(threads, n);
    std::vector<std::vector<ModeAccumulator>> partial(chunks,
                                                      std::vector<ModeAccumulator>(cfg.k, ModeAccumulator(bits)));
    parallel_for(chunks, threads, [&](std::size_t cb, std::size_t ce) {
      for (std::size_t c = cb; c < ce; ++c) {
        const std::size_t begin = n * c / chunks;
        const std::size_t end = n * (c + 1) / chunks;
        for (std::size_t i = begin; i < end; ++i) partial[c][assign[i]].add(data[i]);
      }
    });
    for (std::size_t c = 1; c < chunks; ++c) {
      for (std::uint32_t j = 0; j < cfg.k; ++j) partial[0][j].merge(partial[c][j]);
    }

    std::vector<bool> taken(n, false);
    for (std::uint32_t j = 0; j < cfg.k; ++j) {
      if (partial[0][j].rows() > 0) {
        result.centers[j] = partial[0][j].mode(TieBreak::Zero);
        continue;
      }
      // Empty cluster: reseed with the record farthest from its own center.
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      taken[far] = true;
      result.centers[j] = data[far];
    }

    if (stable && cfg.stop_when_stable) {
      result.converged = true;
      break;
    }
    if (stable) result.converged = true;
  }

  std::vector<Entry> entries(n);
  for (std::size_t i = 0; i < n; ++i) {
    entries[i] = {indexes.empty() ? static_cast<std::uint32_t>(i) : indexes[i], assign[i]};
  }
  result.partition = Partition(std::move(entries), cfg.k);
  return result;
}

std::uint32_t knn(std::span<const BitVector> train, std::span<const std::uint32_t> labels, const BitVector& query,
                  std::uint32_t k, SimilarityMeasure measure) {
  if (train.empty()) throw std::invalid_argument("knn: empty training set");
  if (labels.size() != train.size()) throw std::invalid_argument("knn: label count differs from training set");
  if (k == 0) throw std::invalid_argument("knn: k must be at least 1");
  if (k > train.size()) throw std::invalid_argument("knn: k exceeds training set size");

  std::vector<std::pair<double, std::uint32_t>> scored(train.size());
  for (std::uint32_t i = 0; i < train.size(); ++i) scored[i] = {similarity(measure, query, train[i]), i};
  auto closer = [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); };
  std::partial_sort(scored.begin(), scored.begin() + k, scored.end(), closer);

  struct Tally {
    std::uint32_t votes = 0;
    double total_similarity = 0;
  };
  std::map<std::uint32_t, Tally> tally;
  for (std::uint32_t i = 0; i < k; ++i) {
    auto& t = tally[labels[scored[i].second]];
    t.votes += 1;
    t.total_similarity += scored[i].first;
  }
  auto best = tally.begin();
  for (auto it = std::next(tally.begin()); it != tally.end(); ++it) {
    const auto& a = it->second;
    const auto& b = best->second;
    if (a.votes > b.votes || (a.votes == b.votes && a.total_similarity > b.total_similarity)) best = it;
  }
  return best->first;
}

std::vector<std::uint32_t> knn_batch(std::span<const BitVector> train, std::span<const std::uint32_t> labels,
                                     std::span<const BitVector> queries, std::uint32_t k, SimilarityMeasure measure,
                                     unsigned threads) {
  std::vector<std::uint32_t> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = knn(train, labels, queries[i], k, measure);
  });
  return out;
}

double rand_index(const Partition& p, const Partition& q) {
  const auto pe = p.entries();
  const auto qe = q.entries();
  if (pe.size() != qe.size()) throw std::invalid_argument("rand_index: partitions cover different record sets");
  std::unordered_map<std::uint64_t, std::uint64_t> joint;
  std::unordered_map<std::uint32_t, std::uint64_t> prow;
  std::unordered_map<std::uint32_t, std::uint64_t> qcol;
  for (std::size_t i = 0; i < pe.size(); ++i) {
    if (pe[i].first != qe[i].first) {
      throw std::invalid_argument("rand_index: partitions cover different record sets");
    }
    joint[(std::uint64_t{pe[i].second} << 32) | qe[i].second] += 1;
    prow[pe[i].second] += 1;
    qcol[qe[i].second] += 1;
  }
  const std::uint64_t n = pe.size();
  if (n < 2) return 1.0;
  std::uint64_t together_both = 0, together_p = 0, together_q = 0;
  for (const auto& [key, c] : joint) together_both += choose2(c);
  for (const auto& [key, c] : prow) together_p += choose2(c);
  for (const auto& [key, c] : qcol) together_q += choose2(c);
  const std::uint64_t total = choose2(n);
  // apart in both = total - together_p - together_q + together_both
  const std::uint64_t agree = together_both + (total + together_both - together_p - together_q);
  return static_cast<double>(agree) / static_cast<double>(total);
}

IndexTransposition::IndexTransposition(std::vector<ClassPermutation> classes) : classes_(std::move(classes)) {
  for (const auto& c : classes_) {
    if (c.indexes.size() != c.permutation.size()) {
      throw std::invalid_argument("IndexTransposition: permutation size differs from class size");
    }
    for (std::uint32_t i = 0; i < c.indexes.size(); ++i) {
      const std::uint32_t plain = c.indexes[i];
      const std::uint32_t prot = c.indexes[c.permutation(i)];
      protected_to_plain_.emplace_back(prot, plain);
      plain_to_protected_.emplace_back(plain, prot);
    }
  }
  std::sort(protected_to_plain_.begin(), protected_to_plain_.end());
  std::sort(plain_to_protected_.begin(), plain_to_protected_.end());
  for (std::size_t i = 1; i < plain_to_protected_.size(); ++i) {
    if (plain_to_protected_[i].first == plain_to_protected_[i - 1].first) {
      throw std::invalid_argument("IndexTransposition: index appears in more than one class");
    }
  }
}

IndexTransposition IndexTransposition::identity(std::span<const std::uint32_t> indexes) {
  std::vector<std::uint32_t> ident(indexes.size());
  for (std::uint32_t i = 0; i < ident.size(); ++i) ident[i] = i;
  std::vector<ClassPermutation> one;
  one.push_back({IndexPermutation(0, std::move(ident)), {indexes.begin(), indexes.end()}});
  return IndexTransposition(std::move(one));
}

std::optional<std::uint32_t> IndexTransposition::to_plain(std::uint32_t protected_index) const {
  return lookup(protected_to_plain_, protected_index);
}

std::optional<std::uint32_t> IndexTransposition::to_protected(std::uint32_t plain_index) const {
  return lookup(plain_to_protected_, plain_index);
}

IndexTransposition IndexTransposition::inverse() const {
  std::vector<ClassPermutation> inv;
  inv.reserve(classes_.size());
  for (const auto& c : classes_) inv.push_back({c.permutation.inverse(), c.indexes});
  return IndexTransposition(std::move(inv));
}

Partition transpose_partition(const Partition& p, const IndexTransposition& maps) {
  std::vector<Entry> out;
  out.reserve(p.size());
  for (const auto& [idx, c] : p.entries()) {
    const auto plain = maps.to_plain(idx);
    if (!plain) {
      throw std::invalid_argument("transpose_partition: index " + std::to_string(idx) +
                                  " not covered by any class permutation");
    }
    out.emplace_back(*plain, c);
  }
  return Partition(std::move(out), p.k());
}

}  // namespace hai
