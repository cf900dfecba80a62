#include "hai/security.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hai/errors.hpp"
#include "hai/parallel.hpp"
#include "hai/random.hpp"

namespace hai {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

BitVector random_bits(SeededRng& rng, std::uint32_t n) {
  BitVector v(n);
  for (auto& w : v.mutable_words()) w = rng();
  v.canonicalize();
  return v;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n == 0) return 0;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0 || sbb == 0) return 0;
  return sab / std::sqrt(saa * sbb);
}

std::string scheme_label(const IndexedDataset& ds) {
  switch (ds.meta.scheme) {
    case ContainerScheme::PlainBits: return "plain-bits";
    case ContainerScheme::PlainU8: return "plain-u8";
    case ContainerScheme::BinarySample: return "binary-sample";
    case ContainerScheme::RealProjection: return "real-projection";
  }
  return "unknown";
}

Json params_json(const SketchParams& p) {
  return Json{{"scheme", std::string(scheme_name(p.scheme))},
              {"delta", p.delta.text()},
              {"n_in", p.n_in},
              {"n_out", p.n_out},
              {"quant_bits", p.quant_bits}};
}

}  // namespace

void AttackReport::finish() {
  success_rate = trials == 0 ? 0.0 : static_cast<double>(success_count) / static_cast<double>(trials);
}

Json AttackReport::to_json() const {
  Json m = Json::object();
  for (const auto& [k, v] : metrics) m[k] = v;
  return Json{{"report_version", 1},   {"name", name},
              {"trials", trials},      {"success_count", success_count},
              {"success_rate", success_rate}, {"baseline_rate", baseline_rate},
              {"seed", seed},          {"params", params},
              {"metrics", m},          {"wall_ms", wall_ms}};
}

AttackReport AttackReport::from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("attack report is not a JSON object");
  AttackReport r;
  try {
    if (j.value("report_version", 0) != 1) throw FormatError("unsupported attack report version");
    r.name = j.at("name").get<std::string>();
    r.trials = j.at("trials").get<std::uint64_t>();
    r.success_count = j.at("success_count").get<std::uint64_t>();
    r.success_rate = j.at("success_rate").get<double>();
    r.baseline_rate = j.at("baseline_rate").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.params = j.at("params");
    for (const auto& [k, v] : j.at("metrics").items()) r.metrics[k] = v.get<double>();
    r.wall_ms = j.at("wall_ms").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed attack report: ") + e.what());
  }
  return r;
}

std::string AttackReport::deterministic_dump() const {
  Json j = to_json();
  j.erase("wall_ms");
  return j.dump();
}

// ---------------------------------------------------------------------------
// Preimages

std::uint64_t count_preimages(const BitVector& sketch, const SketchParams& params, const SecretKey& key) {
  if (params.scheme != Scheme::BinarySample) throw std::invalid_argument("preimage search needs binary-sample");
  if (params.n_in > 24) throw std::invalid_argument("preimage search limited to n_in <= 24");
  if (sketch.size() != params.n_out) throw std::invalid_argument("sketch length does not match n_out");
  const BinarySketcher sk(key, params);
  const std::uint64_t space = std::uint64_t{1} << params.n_in;
  std::uint64_t count = 0;
  BitVector x(params.n_in);
  for (std::uint64_t v = 0; v < space; ++v) {
    x.mutable_words()[0] = v;
    if (sk.sketch(x) == sketch) ++count;
  }
  return count;
}

namespace {

// Inverts a sketch under `sk`: sampled bits from the sketch, the rest random.
BitVector invert_sketch(const BinarySketcher& sk, const BitVector& y, SeededRng& rng) {
  BitVector x = random_bits(rng, sk.params().n_in);
  const auto src = sk.sources();
  for (std::size_t j = 0; j < src.size(); ++j) x.set(src[j], y.test(j) != sk.mask().test(j));
  return x;
}

}  // namespace

AttackReport preimage_bruteforce(const SketchParams& params, const SecretKey& key, const PreimageOptions& opts) {
  const auto start = Clock::now();
  if (params.scheme != Scheme::BinarySample) throw std::invalid_argument("preimage attack needs binary-sample");
  if (params.n_in > 24) throw std::invalid_argument("preimage attack limited to n_in <= 24");
  if (opts.targets == 0) throw std::invalid_argument("preimage attack needs at least one target");
  if (!opts.with_key && opts.candidate_keys == 0) throw std::invalid_argument("keyless attack needs candidate keys");

  AttackReport r;
  r.name = "preimage";
  r.seed = opts.seed;
  r.params = params_json(params);
  r.params["targets"] = opts.targets;
  r.params["with_key"] = opts.with_key;
  if (!opts.with_key) r.params["candidate_keys"] = opts.candidate_keys;

  const BinarySketcher owner(key, params);
  std::vector<BitVector> xs;
  std::vector<BitVector> ys;
  for (std::uint32_t t = 0; t < opts.targets; ++t) {
    SeededRng rng(derive_seed(opts.seed, t));
    xs.push_back(random_bits(rng, params.n_in));
    ys.push_back(owner.sketch(xs.back()));
  }
  const double n_in = params.n_in;

  if (opts.with_key) {
    std::vector<std::uint64_t> counts(opts.targets);
    std::vector<std::uint8_t> hits(opts.targets);
    parallel_for(opts.targets, resolve_threads(opts.threads), [&](std::size_t b, std::size_t e) {
      for (std::size_t t = b; t < e; ++t) {
        counts[t] = count_preimages(ys[t], params, key);
        SeededRng rng(derive_seed(derive_seed(opts.seed, t), 0));
        hits[t] = invert_sketch(owner, ys[t], rng) == xs[t];
      }
    });
    r.trials = opts.targets;
    r.success_count = static_cast<std::uint64_t>(std::count(hits.begin(), hits.end(), 1));
    r.baseline_rate = std::ldexp(1.0, -static_cast<int>(params.n_in - params.n_out));
    r.metrics["preimages_min"] = static_cast<double>(*std::min_element(counts.begin(), counts.end()));
    r.metrics["preimages_max"] = static_cast<double>(*std::max_element(counts.begin(), counts.end()));
    r.metrics["expected_preimages"] = std::ldexp(1.0, static_cast<int>(params.n_in - params.n_out));
  } else {
    // recovery[c * targets + t]
    std::vector<double> recovery(std::size_t{opts.candidate_keys} * opts.targets);
    std::vector<std::uint8_t> hits(recovery.size());
    parallel_for(opts.candidate_keys, resolve_threads(opts.threads), [&](std::size_t b, std::size_t e) {
      for (std::size_t c = b; c < e; ++c) {
        const SecretKey guess = SecretKey::from_seed(derive_seed(opts.seed ^ 0x6b657973ULL, c));
        const BinarySketcher sk(guess, params);
        for (std::uint32_t t = 0; t < opts.targets; ++t) {
          SeededRng rng(derive_seed(derive_seed(opts.seed, t), c + 1));
          const BitVector xh = invert_sketch(sk, ys[t], rng);
          const std::size_t at = c * opts.targets + t;
          recovery[at] = 1.0 - static_cast<double>(hamming(xh, xs[t])) / n_in;
          hits[at] = xh == xs[t];
        }
      }
    });
    r.trials = recovery.size();
    r.success_count = static_cast<std::uint64_t>(std::count(hits.begin(), hits.end(), 1));
    r.baseline_rate = std::ldexp(1.0, -static_cast<int>(params.n_in));
    double best = 0;
    for (std::uint32_t c = 0; c < opts.candidate_keys; ++c) {
      double s = 0;
      for (std::uint32_t t = 0; t < opts.targets; ++t) s += recovery[std::size_t{c} * opts.targets + t];
      best = std::max(best, s / opts.targets);
    }
    r.metrics["mean_bit_recovery"] =
        std::accumulate(recovery.begin(), recovery.end(), 0.0) / static_cast<double>(recovery.size());
    r.metrics["max_bit_recovery"] = best;
  }
  r.finish();
  r.wall_ms = elapsed_ms(start);
  return r;
}

// ---------------------------------------------------------------------------
// Linkage

namespace {

// Pairwise distances, row-major n x n.
std::vector<double> distance_matrix(const IndexedDataset& ds, unsigned threads) {
  const std::size_t n = ds.size();
  std::vector<double> d(n * n, 0.0);
  const bool bits = ds.meta.payload_kind() == PayloadKind::Bits;
  const double len = ds.meta.payload_elements();
  std::vector<BitVector> rows;
  if (bits) rows = ds.bit_rows();
  parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        if (bits) {
          d[i * n + j] = static_cast<double>(hamming(rows[i], rows[j])) / len;
        } else {
          const auto& a = ds.records[i].payload;
          const auto& c = ds.records[j].payload;
          double s = 0;
          for (std::size_t k = 0; k < a.size(); ++k) {
            const double diff = double(a[k]) - double(c[k]);
            s += diff * diff;
          }
          d[i * n + j] = std::sqrt(s / len);
        }
      }
    }
  });
  return d;
}

// Sorted distance profiles scaled by the dataset's mean distance. For the
// correlation score each profile is also centered and scaled to unit norm.
std::vector<std::vector<double>> profiles(const IndexedDataset& ds, ProfileScore score, unsigned threads) {
  const std::size_t n = ds.size();
  const auto d = distance_matrix(ds, threads);
  double mean = n > 1 ? std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n * (n - 1)) : 0.0;
  if (mean == 0) mean = 1;
  std::vector<std::vector<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = out[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) p.push_back(d[i * n + j] / mean);
    }
    std::sort(p.begin(), p.end());
    if (score == ProfileScore::Correlation && !p.empty()) {
      const double m = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
      double norm = 0;
      for (auto& v : p) {
        v -= m;
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (auto& v : p) v = norm > 0 ? v / norm : 0.0;
    }
  }
  return out;
}

// Maximum-weight perfect matching on an n x n score matrix (row -> column),
// via the shortest augmenting path form of the Hungarian method.
std::vector<std::size_t> hungarian_max(const std::vector<double>& score, std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -score[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> match(n);
  for (std::size_t j = 1; j <= n; ++j) match[p[j] - 1] = j - 1;
  return match;
}

std::vector<std::size_t> greedy_max(const std::vector<double>& score, std::size_t n) {
  std::vector<std::size_t> order(n * n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  std::vector<std::size_t> match(n, n);
  std::vector<char> taken(n, 0);
  std::size_t left = n;
  for (const std::size_t at : order) {
    if (left == 0) break;
    const std::size_t i = at / n;
    const std::size_t j = at % n;
    if (match[i] != n || taken[j]) continue;
    match[i] = j;
    taken[j] = 1;
    --left;
  }
  return match;
}

}  // namespace

AttackReport linkage_attack(const IndexedDataset& plain, const IndexedDataset& protected_set,
                            const IndexTransposition& truth, const LinkageOptions& opts) {
  const auto start = Clock::now();
  const std::size_t n = plain.size();
  if (n == 0) throw std::invalid_argument("linkage attack needs records");
  if (protected_set.size() != n) throw std::invalid_argument("linkage attack needs equal record counts");
  const unsigned threads = resolve_threads(opts.threads);

  const auto pa = profiles(plain, opts.score, threads);
  const auto pb = profiles(protected_set, opts.score, threads);
  std::vector<double> score(n * n);
  parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        if (opts.score == ProfileScore::Correlation) {
          for (std::size_t k = 0; k < pa[i].size(); ++k) s += pa[i][k] * pb[j][k];
        } else {
          for (std::size_t k = 0; k < pa[i].size(); ++k) {
            const double diff = pa[i][k] - pb[j][k];
            s -= diff * diff;
          }
        }
        score[i * n + j] = s;
      }
    }
  });

  const auto match = opts.assignment == Assignment::Hungarian ? hungarian_max(score, n) : greedy_max(score, n);
  AttackReport r;
  r.name = "linkage";
  r.trials = n;
  for (std::size_t i = 0; i < n; ++i) {
    const auto expected = truth.to_protected(plain.records[i].index);
    if (expected && *expected == protected_set.records[match[i]].index) ++r.success_count;
  }
  r.baseline_rate = 1.0 / static_cast<double>(n);
  r.params = Json{{"plain_scheme", scheme_label(plain)},
                  {"protected_scheme", scheme_label(protected_set)},
                  {"records", n},
                  {"score", opts.score == ProfileScore::Correlation ? "correlation" : "distance"},
                  {"assignment", opts.assignment == Assignment::Hungarian ? "hungarian" : "greedy"}};
  r.finish();
  r.metrics["lift_over_baseline"] = r.success_rate / r.baseline_rate;
  r.wall_ms = elapsed_ms(start);
  return r;
}

// ---------------------------------------------------------------------------
// Key avalanche

AttackReport key_avalanche(const SketchParams& params, const IndexedDataset& sample, const AvalancheOptions& opts) {
  const auto start = Clock::now();
  if (sample.size() < 2) throw std::invalid_argument("key avalanche needs at least two records");
  if (opts.key_pairs == 0) throw std::invalid_argument("key avalanche needs key pairs");
  const bool binary = params.scheme == Scheme::BinarySample;
  const auto want = binary ? ContainerScheme::PlainBits : ContainerScheme::PlainU8;
  if (sample.meta.scheme != want || sample.meta.n_in != params.n_in) {
    throw std::invalid_argument("sample does not match sketch parameters");
  }

  const std::size_t m = sample.size();
  std::vector<double> stat(std::size_t{opts.key_pairs} * m);
  parallel_for(opts.key_pairs, resolve_threads(opts.threads), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      const SecretKey ka = SecretKey::from_seed(derive_seed(opts.seed, 2 * p));
      const SecretKey kb = opts.same_key ? ka : SecretKey::from_seed(derive_seed(opts.seed, 2 * p + 1));
      const Sketcher sa(ka, params);
      const Sketcher sb(kb, params);
      for (std::size_t i = 0; i < m; ++i) {
        const auto ya = sa.sketch_payload(sample.records[i].payload);
        const auto yb = sb.sketch_payload(sample.records[i].payload);
        double s = 0;
        if (binary) {
          const auto va = BitVector::from_bytes(ya, params.n_out);
          const auto vb = BitVector::from_bytes(yb, params.n_out);
          s = static_cast<double>(hamming(va, vb)) / params.n_out;
        } else {
          const std::vector<double> da(ya.begin(), ya.end());
          const std::vector<double> db(yb.begin(), yb.end());
          s = pearson(da, db);
        }
        stat[p * m + i] = s;
      }
    }
  });

  const double centre = binary ? 0.5 : 0.0;
  const double tol = binary ? 0.02 : 0.05;
  AttackReport r;
  r.name = "key-avalanche";
  r.seed = opts.seed;
  r.params = params_json(params);
  r.params["records"] = m;
  r.params["key_pairs"] = opts.key_pairs;
  r.params["same_key"] = opts.same_key;
  r.trials = stat.size();
  double sum = 0, abs_sum = 0, worst = 0;
  for (const double s : stat) {
    const double dev = std::abs(s - centre);
    sum += s;
    abs_sum += dev;
    worst = std::max(worst, dev);
    if (dev > tol) ++r.success_count;
  }
  // sd of the statistic for independent outputs: 1/(2 sqrt n) or 1/sqrt n.
  const double sd = binary ? 0.5 / std::sqrt(double(params.n_out)) : 1.0 / std::sqrt(double(params.n_out));
  r.baseline_rate = std::erfc(tol / sd / std::sqrt(2.0));
  r.metrics["mean_statistic"] = sum / static_cast<double>(stat.size());
  r.metrics["mean_abs_deviation"] = abs_sum / static_cast<double>(stat.size());
  r.metrics["max_abs_deviation"] = worst;
  r.finish();
  r.wall_ms = elapsed_ms(start);
  return r;
}

// ---------------------------------------------------------------------------
// Malleability

AttackReport malleability_probe(const IndexedDataset& model_data, std::span<const BitVector> centers,
                                const IndexedDataset& probes, const MalleabilityOptions& opts) {
  const auto start = Clock::now();
  if (centers.empty()) throw std::invalid_argument("malleability probe needs a trained model");
  if (model_data.size() == 0 || probes.size() == 0) throw std::invalid_argument("malleability probe needs records");
  const auto rows = model_data.bit_rows();
  const auto probe_rows = probes.bit_rows();
  const std::size_t n = centers.front().size();
  for (const auto& c : centers) {
    if (c.size() != n) throw std::invalid_argument("centers differ in length");
  }
  if (rows.front().size() != n || probe_rows.front().size() != n) {
    throw std::invalid_argument("records and centers differ in length");
  }

  std::vector<std::uint64_t> dist;
  dist.reserve(rows.size());
  for (const auto& x : rows) {
    const auto c = nearest_center(x, centers, SimilarityMeasure::HammingSimilarity);
    dist.push_back(hamming(x, centers[c]));
  }
  std::sort(dist.begin(), dist.end());
  const std::size_t rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(dist.size())));
  const std::uint64_t threshold = dist[std::max<std::size_t>(rank, 1) - 1];

  const auto k = static_cast<std::uint64_t>(centers.size());
  auto admissible = [&](const BitVector& x, std::uint32_t target) {
    return nearest_center(x, centers, SimilarityMeasure::HammingSimilarity) == target &&
           hamming(x, centers[target]) <= threshold;
  };

  AttackReport r;
  r.name = "malleability";
  r.seed = opts.seed;
  r.trials = opts.trials;
  std::uint64_t baseline_hits = 0;
  double flips_total = 0;
  for (std::uint32_t t = 0; t < opts.trials; ++t) {
    SeededRng rng(derive_seed(opts.seed, t));
    BitVector x = probe_rows[uniform_below(rng, probe_rows.size())];
    const auto target = static_cast<std::uint32_t>(uniform_below(rng, k));
    if (admissible(x, target)) ++baseline_hits;
    std::vector<std::uint32_t> diff;
    const BitVector delta = x ^ centers[target];
    for (std::uint32_t i = 0; i < n; ++i) {
      if (delta.test(i)) diff.push_back(i);
    }
    const std::size_t flips = std::min<std::size_t>(opts.budget.value_or(diff.size()), diff.size());
    const auto pick = partial_shuffle(rng, static_cast<std::uint32_t>(diff.size()), static_cast<std::uint32_t>(flips));
    for (const auto p : pick) x.flip(diff[p]);
    flips_total += static_cast<double>(flips);
    if (admissible(x, target)) ++r.success_count;
  }
  r.baseline_rate = opts.trials == 0 ? 0.0 : static_cast<double>(baseline_hits) / opts.trials;
  r.params = Json{{"scheme", scheme_label(probes)},
                  {"bits", n},
                  {"clusters", k},
                  {"model_records", rows.size()},
                  {"probe_records", probe_rows.size()}};
  r.params["budget"] = opts.budget ? Json(*opts.budget) : Json("unlimited");
  r.metrics["admissible_threshold"] = static_cast<double>(threshold);
  r.metrics["mean_flips"] = opts.trials == 0 ? 0.0 : flips_total / opts.trials;
  r.finish();
  r.wall_ms = elapsed_ms(start);
  return r;
}

// ---------------------------------------------------------------------------
// Model extraction

AttackReport model_extraction_check(const IndexedDataset& sample_a, const IndexedDataset& sample_b,
                                    const KModesConfig& cfg) {
  const auto start = Clock::now();
  if (sample_a.size() == 0 || sample_b.size() == 0) throw std::invalid_argument("model extraction needs records");
  const auto rows_a = sample_a.bit_rows();
  const auto rows_b = sample_b.bit_rows();
  if (rows_a.front().size() != rows_b.front().size()) throw std::invalid_argument("samples differ in record length");

  const auto idx_a = sample_a.indexes();
  const auto idx_b = sample_b.indexes();
  const auto ma = kmodes(rows_a, idx_a, cfg);
  const auto mb = kmodes(rows_b, idx_b, cfg);
  const std::uint32_t k = cfg.k;
  const double len = static_cast<double>(rows_a.front().size());

  std::vector<std::uint64_t> cost(std::size_t{k} * k);
  for (std::uint32_t b = 0; b < k; ++b) {
    for (std::uint32_t a = 0; a < k; ++a) cost[b * k + a] = hamming(mb.centers[b], ma.centers[a]);
  }
  // match[b] = cluster of model A paired with cluster b of model B.
  std::vector<std::uint32_t> match(k);
  std::iota(match.begin(), match.end(), 0U);
  if (k <= 8) {
    auto perm = match;
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    do {
      std::uint64_t total = 0;
      for (std::uint32_t b = 0; b < k; ++b) total += cost[b * k + perm[b]];
      if (total < best) {
        best = total;
        match = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<char> taken(k, 0);
    for (std::uint32_t b = 0; b < k; ++b) {
      std::uint32_t pick = k;
      for (std::uint32_t a = 0; a < k; ++a) {
        if (!taken[a] && (pick == k || cost[b * k + a] < cost[b * k + pick])) pick = a;
      }
      match[b] = pick;
      taken[pick] = 1;
    }
  }
  double dist = 0;
  for (std::uint32_t b = 0; b < k; ++b) dist += static_cast<double>(cost[b * k + match[b]]) / len;
  dist /= k;

  AttackReport r;
  r.name = "model-extraction";
  r.seed = cfg.seed;
  r.trials = rows_b.size();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> via_a;
  for (std::size_t i = 0; i < rows_b.size(); ++i) {
    const auto a = nearest_center(rows_b[i], ma.centers, cfg.distance);
    via_a.emplace_back(idx_b[i], a);
    if (match[*mb.partition.cluster_of(idx_b[i])] == a) ++r.success_count;
  }
  r.baseline_rate = 1.0 / k;
  r.params = Json{{"k", k},
                  {"iterations", cfg.iterations},
                  {"distance", std::string(measure_name(cfg.distance))},
                  {"records_a", rows_a.size()},
                  {"records_b", rows_b.size()},
                  {"bits", rows_a.front().size()}};
  r.metrics["center_distance"] = dist;
  r.metrics["center_similarity"] = 1.0 - dist;
  r.metrics["cross_rand_index"] = rand_index(Partition(std::move(via_a), k), mb.partition);
  r.finish();
  r.wall_ms = elapsed_ms(start);
  return r;
}

}  // namespace hai
