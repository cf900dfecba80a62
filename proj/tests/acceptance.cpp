// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.
//
// Image criteria use Fashion-MNIST when HAI_FASHION_MNIST_DIR names a
// directory holding the four uncompressed IDX files, and the synthetic image
// generator otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "hai/bench.hpp"
#include "hai/dataset.hpp"
#include "hai/ml.hpp"
#include "hai/parallel.hpp"
#include "hai/random.hpp"
#include "hai/security.hpp"
#include "hai/sketch.hpp"
#include "support.hpp"

namespace hai {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

unsigned threads() { return resolve_threads(0); }

// ---------------------------------------------------------------------------
// Image data

std::pair<IndexedDataset, IndexedDataset> image_splits(std::string& source) {
  if (const char* dir = std::getenv("HAI_FASHION_MNIST_DIR"); dir != nullptr && *dir != '\0') {
    const fs::path d(dir);
    source = "fashion-mnist";
    auto train = read_idx(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte");
    auto val = read_idx(d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte");
    // Validation records follow the training records in index space.
    for (auto& r : val.records) r.index += static_cast<std::uint32_t>(train.size());
    return {std::move(train), std::move(val)};
  }
  source = "synthetic images";
  auto [train, val] = gen_synthetic_images(ImageSynthConfig{});
  return {std::move(train), std::move(val)};
}

// ---------------------------------------------------------------------------
// 1. Clustering preservation

Outcome clustering_preservation() {
  const auto start = Clock::now();
  double worst = 1.0;
  std::ostringstream seeds;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.p_flip = 0.2;
    const auto train = gen_synthetic_cyber(cfg).first;
    const auto key = SecretKey::from_seed(1000 + seed);
    const auto params = SketchParams::make(Scheme::BinarySample, CompressionRate::parse("3"), train.meta.n_in);
    const auto prot = protect_dataset(train, Sketcher(key, params), true, key, threads());

    KModesConfig kc;
    kc.seed = seed;
    kc.threads = threads();
    const auto plain_run = kmodes(train.bit_rows(), train.indexes(), kc);
    const auto prot_run = kmodes(prot.bit_rows(), prot.indexes(), kc);
    const auto maps = derive_transposition(key, train, true);
    const double ri = rand_index(plain_run.partition, transpose_partition(prot_run.partition, maps));
    worst = std::min(worst, ri);
    seeds << (seed > 1 ? "," : "") << fmt("%.4f", ri);
  }
  const double secs = seconds_since(start);
  return {worst >= 0.98 && secs <= 120.0,
          "min RI " + fmt("%.4f", worst) + " over 10 seeds [" + seeds.str() + "], " + fmt("%.1f", secs) + " s total"};
}

// ---------------------------------------------------------------------------
// 2-4. Size, speed-up and classification from one benchmark run

struct BenchOutcomes {
  Outcome size, speed, knn;
};

BenchOutcomes bench_criteria() {
  const auto [train, val] = gen_synthetic_cyber(SynthConfig{});
  BenchConfig cfg;
  cfg.runs = 5;
  cfg.threads = threads();
  cfg.kmodes.threads = threads();
  cfg.kmodes.stop_when_stable = false;
  const auto r = run_bench(train, val, SecretKey::from_seed(77), cfg);
  BenchOutcomes o;
  o.size = {r.size_ratio >= 2.8 && r.size_ratio <= 3.2 && r.payload_ratio >= 2.97 && r.payload_ratio <= 3.03,
            "HAI1 ratio " + fmt("%.4f", r.size_ratio) + ", payload ratio " + fmt("%.4f", r.payload_ratio) + " (" +
                std::to_string(r.plaintext_bytes) + " / " + std::to_string(r.protected_bytes) + " bytes)"};
  o.speed = {r.speedup >= 2.0, "k-modes median " + fmt("%.1f", r.kmodes.plaintext_ms) + " ms plaintext vs " +
                                   fmt("%.1f", r.kmodes.protected_ms) + " ms protected, speed-up " +
                                   fmt("%.3f", r.speedup) + " (5 runs, " + std::to_string(threads()) + " thread(s))"};
  o.knn = {r.knn_agreement >= 0.98, "agreement " + fmt("%.4f", r.knn_agreement) + " on " +
                                        std::to_string(r.val_records) + " validation records"};
  return o;
}

// ---------------------------------------------------------------------------
// 5. Order preservation
//
// Margin-qualifying triples are spread over kKeys independent keys, so the
// pooled rate estimates the violation probability over both key and triple.
// Plaintext distances generalize Hamming distance: squared Euclidean distance
// of elements scaled to [0, 1], with the margin on the same n-element scale.

constexpr double kMargin = 0.02;
constexpr std::size_t kTriples = 10000;
constexpr std::size_t kKeys = 10;

struct Violations {
  double pooled = 0;
  double worst_key = 0;
};

Violations tally(const std::vector<std::size_t>& per_key) {
  const std::size_t per = kTriples / kKeys;
  Violations v;
  for (auto c : per_key) {
    v.pooled += double(c) / double(kTriples);
    v.worst_key = std::max(v.worst_key, double(c) / double(per));
  }
  return v;
}

// x uniform, x' and x'' obtained from x by flipping uniformly chosen sets of
// m1 and m2 bits, m1 and m2 uniform in [0, n/2].
Violations binary_violations(const CompressionRate& delta, std::uint64_t seed) {
  const std::uint32_t n = 49955;
  const auto params = SketchParams::make(Scheme::BinarySample, delta, n);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> flips(0, n / 2);
  std::uniform_int_distribution<std::uint32_t> pos(0, n - 1);
  auto flipped = [&](const BitVector& x, std::uint32_t m) {
    BitVector y = x;
    std::vector<std::uint8_t> used(n, 0);
    for (std::uint32_t done = 0; done < m;) {
      const auto p = pos(rng);
      if (used[p]) continue;
      used[p] = 1;
      y.flip(p);
      ++done;
    }
    return y;
  };
  std::vector<std::size_t> per_key(kKeys, 0);
  for (std::size_t key = 0; key < kKeys; ++key) {
    const BinarySketcher sk(SecretKey::from_seed(derive_seed(seed, key)), params);
    for (std::size_t counted = 0; counted < kTriples / kKeys;) {
      const auto m1 = flips(rng);
      const auto m2 = flips(rng);
      if (std::abs(double(m1) - double(m2)) < kMargin * n) continue;
      const auto x = test::to_vector(test::random_bits(rng, n));
      const auto s = sk.sketch(x);
      const auto d1 = hamming(s, sk.sketch(flipped(x, m1)));
      const auto d2 = hamming(s, sk.sketch(flipped(x, m2)));
      ++counted;
      if (!((m1 < m2 && d1 < d2) || (m1 > m2 && d1 > d2))) ++per_key[key];
    }
  }
  return tally(per_key);
}

double squared_l2(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  return s;
}

// Random record triples.
Violations real_violations(const IndexedDataset& images, const CompressionRate& delta, std::uint32_t n_out,
                           std::uint64_t seed) {
  const auto params = SketchParams::make(Scheme::RealProjection, delta, images.meta.n_in, n_out);
  const double n = images.meta.n_in;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
  std::vector<std::size_t> per_key(kKeys, 0);
  for (std::size_t key = 0; key < kKeys; ++key) {
    const RealSketcher sk(SecretKey::from_seed(derive_seed(seed, key)), params);
    std::vector<std::vector<std::uint8_t>> sketches(images.size());
    parallel_for(images.size(), threads(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) sketches[i] = sk.sketch(images.records[i].payload);
    });
    std::size_t counted = 0;
    for (std::size_t attempts = 0; counted < kTriples / kKeys && attempts < 100 * kTriples; ++attempts) {
      const auto i = pick(rng), j = pick(rng), l = pick(rng);
      if (i == j || i == l || j == l) continue;
      const auto& x = images.records[i].payload;
      const double p1 = squared_l2(x, images.records[j].payload) / (255.0 * 255.0);
      const double p2 = squared_l2(x, images.records[l].payload) / (255.0 * 255.0);
      if (std::abs(p1 - p2) < kMargin * n) continue;
      const double s1 = squared_l2(sketches[i], sketches[j]);
      const double s2 = squared_l2(sketches[i], sketches[l]);
      ++counted;
      if (!((p1 < p2 && s1 < s2) || (p1 > p2 && s1 > s2))) ++per_key[key];
    }
    if (counted < kTriples / kKeys) throw std::runtime_error("too few image triples clear the margin");
  }
  return tally(per_key);
}

Outcome order_preservation(const IndexedDataset& images) {
  const auto d3 = CompressionRate::parse("3");
  const auto d6 = CompressionRate::parse("6");
  const std::vector<std::pair<std::string, Violations>> runs{
      {"binary d3", binary_violations(d3, 31)},
      {"binary d6", binary_violations(d6, 61)},
      {"real d3", real_violations(images, d3, 256, 32)},
      {"real d6", real_violations(images, d6, 132, 62)}};
  bool ok = true;
  std::string detail = "violation rate (worst key)";
  for (const auto& [name, v] : runs) {
    ok = ok && v.pooled <= 0.01;
    detail += (name == runs.front().first ? " " : ", ") + name + " " + fmt("%.4f", v.pooled) + " (" +
              fmt("%.4f", v.worst_key) + ")";
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 6. Oracle equivalence

Outcome oracle_equivalence() {
  std::mt19937_64 rng(606);
  std::size_t mismatches = 0;
  std::uniform_int_distribution<std::size_t> len(0, 5000);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  for (int t = 0; t < 10000; ++t) {
    const auto n = len(rng);
    const auto a = test::random_bits(rng, n, density(rng));
    const auto b = test::random_bits(rng, n, density(rng));
    const auto va = test::to_vector(a);
    const auto vb = test::to_vector(b);
    test::Bits x(n), o(n), d(n), na(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a[i] ^ b[i];
      o[i] = a[i] | b[i];
      d[i] = a[i] & b[i];
      na[i] = 1 - a[i];
    }
    bool ok = popcount(va) == test::naive_popcount(a) && and_similarity(va, vb) == test::naive_and(a, b) &&
              hamming(va, vb) == test::naive_hamming(a, b) && test::to_bits(va ^ vb) == x &&
              test::to_bits(va | vb) == o && test::to_bits(va & vb) == d && test::to_bits(~va) == na &&
              test::naive_decode(va.to_bytes(), n) == a;
    if (hardware_popcount_available()) {
      ok = ok && popcount(va, PopcountPath::Scalar) == popcount(va, PopcountPath::Hardware) &&
           hamming(va, vb, PopcountPath::Scalar) == hamming(va, vb, PopcountPath::Hardware);
    }
    mismatches += !ok;
  }
  const std::size_t bit_mismatches = mismatches;

  std::size_t ri_pairs = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    const auto parts = test::all_partitions(n);
    for (const auto& p : parts) {
      for (const auto& q : parts) {
        const auto kp = *std::max_element(p.begin(), p.end()) + 1;
        const auto kq = *std::max_element(q.begin(), q.end()) + 1;
        ++ri_pairs;
        if (rand_index(Partition::from_clusters(p, kp), Partition::from_clusters(q, kq)) !=
            test::naive_rand_index(p, q)) {
          ++mismatches;
        }
      }
    }
  }

  std::vector<test::Bits> raw;
  std::vector<BitVector> train;
  std::vector<std::uint32_t> labels;
  for (int i = 0; i < 400; ++i) {
    raw.push_back(test::random_bits(rng, 96));
    train.push_back(test::to_vector(raw.back()));
    labels.push_back(static_cast<std::uint32_t>(rng() % 4));
  }
  for (int q = 0; q < 500; ++q) {
    const auto query = test::random_bits(rng, 96);
    const std::uint32_t k = 1 + static_cast<std::uint32_t>(rng() % 9);
    const auto want = test::naive_knn(raw, labels, query, k, [](std::size_t d) { return 96.0 - double(d); });
    mismatches += knn(train, labels, test::to_vector(query), k, SimilarityMeasure::HammingSimilarity) != want;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches (" + std::to_string(bit_mismatches) +
                               " in 10000 bit-vector cases, " + std::to_string(ri_pairs) +
                               " partition pairs, 500 k-NN queries)"};
}

// ---------------------------------------------------------------------------
// 7. Security battery

bool json_valid(const AttackReport& r) {
  const auto text = r.to_json().dump();
  return AttackReport::from_json(Json::parse(text)).deterministic_dump() == r.deterministic_dump();
}

Outcome security_battery(const IndexedDataset& images) {
  std::vector<std::string> failures;
  std::ostringstream detail;

  std::size_t preimage_cases = 0;
  for (std::uint32_t n_in = 8; n_in <= 20; ++n_in) {
    std::set<std::uint32_t> outs{8, (n_in + 8) / 2, n_in};
    for (auto n_out : outs) {
      const auto params = SketchParams::make(Scheme::BinarySample, CompressionRate::parse("1.5"), n_in, n_out);
      const auto key = SecretKey::from_seed(n_in * 100 + n_out);
      const BinarySketcher sk(key, params);
      std::mt19937_64 rng(n_in * 7 + n_out);
      for (int t = 0; t < 2; ++t) {
        ++preimage_cases;
        const auto y = sk.sketch(test::to_vector(test::random_bits(rng, n_in)));
        if (count_preimages(y, params, key) != (std::uint64_t{1} << (n_in - n_out))) {
          failures.push_back("preimage count n_in=" + std::to_string(n_in) + " n_out=" + std::to_string(n_out));
        }
      }
    }
  }
  detail << preimage_cases << " preimage counts";

  SynthConfig sc;
  sc.n_train = 20;
  sc.n_val = 1;
  const auto cyber_sample = gen_synthetic_cyber(sc).first;
  AvalancheOptions ao;
  ao.key_pairs = 100;
  ao.threads = threads();
  const auto bin = key_avalanche(SketchParams::make(Scheme::BinarySample, CompressionRate::parse("3"), 49955),
                                 cyber_sample, ao);
  if (bin.metrics.at("max_abs_deviation") > 0.02) failures.push_back("binary avalanche");
  IndexedDataset image_sample = images;
  image_sample.records.resize(20);
  const auto real = key_avalanche(
      SketchParams::make(Scheme::RealProjection, CompressionRate::parse("3"), images.meta.n_in, 256), image_sample, ao);
  if (std::abs(real.metrics.at("mean_statistic")) > 0.05) failures.push_back("real avalanche");
  detail << "; avalanche distance " << fmt("%.4f", bin.metrics.at("mean_statistic")) << " (max dev "
         << fmt("%.4f", bin.metrics.at("max_abs_deviation")) << "), rho " << fmt("%.4f", real.metrics.at("mean_statistic"));

  PreimageOptions po;
  po.targets = 16;
  po.candidate_keys = 100;
  po.threads = threads();
  const auto keyless =
      preimage_bruteforce(SketchParams::make(Scheme::BinarySample, CompressionRate::parse("2"), 20), SecretKey::from_seed(5), po);
  const double recovery = keyless.metrics.at("mean_bit_recovery");
  if (std::abs(recovery - 0.5) > 0.05) failures.push_back("keyless recovery");
  detail << "; keyless recovery " << fmt("%.4f", recovery);

  SynthConfig lc;
  lc.n_train = 200;
  lc.n_val = 1;
  const auto plain = gen_synthetic_cyber(lc).first;
  const auto key = SecretKey::from_seed(9);
  const auto params = SketchParams::make(Scheme::BinarySample, CompressionRate::parse("3"), plain.meta.n_in);
  const auto prot = protect_dataset(plain, Sketcher(key, params), true, key, threads());
  const auto maps = derive_transposition(key, plain, true);
  LinkageOptions lo;
  lo.threads = threads();
  const auto link_a = linkage_attack(plain, prot, maps, lo);
  const auto link_b = linkage_attack(plain, prot, maps, lo);
  if (link_a.deterministic_dump() != link_b.deterministic_dump() || !json_valid(link_a)) {
    failures.push_back("linkage determinism/json");
  }

  KModesConfig kc;
  kc.threads = threads();
  const auto model = kmodes(prot.bit_rows(), kc);
  const auto mall_a = malleability_probe(prot, model.centers, prot, {});
  const auto mall_b = malleability_probe(prot, model.centers, prot, {});
  if (mall_a.deterministic_dump() != mall_b.deterministic_dump() || !json_valid(mall_a)) {
    failures.push_back("malleability determinism/json");
  }
  detail << "; findings: linkage " << fmt("%.3f", link_a.success_rate) << " vs chance "
         << fmt("%.3f", link_a.baseline_rate) << ", malleability " << fmt("%.3f", mall_a.success_rate)
         << " vs no-flip " << fmt("%.3f", mall_a.baseline_rate);

  for (const auto& f : failures) detail << "; failed " << f;
  return {failures.empty(), detail.str()};
}

// ---------------------------------------------------------------------------
// 8. Shape conformance through the command line

Outcome shape_conformance(const IndexedDataset& train, const IndexedDataset& val, const std::string& source) {
  const auto dir = test::temp_dir("acceptance-shapes");
  write_idx(train, dir / "train-images", dir / "train-labels");
  write_idx(val, dir / "val-images", dir / "val-labels");
  std::ostringstream sink;
  auto cli = [&](std::vector<std::string> args) {
    args.insert(args.begin(), {"--threads", std::to_string(threads())});
    if (cli::run(args, sink, sink) != 0) throw std::runtime_error("command failed: " + args[2] + "\n" + sink.str());
  };
  cli({"genkey", "--out", (dir / "owner.key").string()});
  const auto key = read_key_file(dir / "owner.key").key;

  std::vector<std::string> problems;
  std::ostringstream detail;
  for (const std::string delta : {"3", "6"}) {
    const std::uint32_t want = delta == "3" ? 256 : 132;
    for (const std::string split : {"train", "val"}) {
      const auto out = dir / (split + "-d" + delta + ".hai");
      cli({"protect", "--key", (dir / "owner.key").string(), "--in", (dir / (split + "-images")).string(), "--labels",
           (dir / (split + "-labels")).string(), "--scheme", "real-projection", "--delta", delta, "--permute-classes",
           "--out", out.string()});
      const auto ds = read_hai1(out);
      const auto& plain = split == "train" ? train : val;
      if (ds.meta.record_len != want) problems.push_back(split + " d" + delta + " record length");
      if (ds.size() != plain.size()) problems.push_back(split + " d" + delta + " record count");
      if (split == "train") detail << "d" << delta << " " << ds.meta.record_len << " bytes; ";
      // The published index set and class sizes are unchanged.
      if (ds.indexes() != plain.indexes()) problems.push_back(split + " d" + delta + " index set");
      const auto maps = derive_transposition(key, plain, true);
      for (const auto& r : ds.records) {
        const auto from = maps.to_plain(r.index);
        if (!from || plain.records[*plain.find(*from)].label != r.label) {
          problems.push_back(split + " d" + delta + " class mapping");
          break;
        }
      }
      for (const auto& c : maps.classes()) {
        std::vector<std::uint32_t> image(c.permutation.size());
        for (std::uint32_t i = 0; i < c.permutation.size(); ++i) image[i] = c.permutation(i);
        std::sort(image.begin(), image.end());
        std::vector<std::uint32_t> ident(image.size());
        std::iota(ident.begin(), ident.end(), 0U);
        if (image != ident) problems.push_back(split + " class permutation not bijective");
      }
    }
  }
  fs::remove_all(dir);
  detail << train.size() << "/" << val.size() << " split preserved, per-class permutations bijective (" << source
         << ")";
  for (const auto& p : problems) detail << "; failed " << p;
  return {problems.empty(), detail.str()};
}

}  // namespace
}  // namespace hai

int main() {
  using namespace hai;
  int failed = 0;
  auto report = [&](const std::string& name, const std::function<Outcome()>& fn) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.passed;
    std::cout << (o.passed ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt("%.1f", seconds_since(start))
              << " s]" << std::endl;
  };

  std::string source;
  IndexedDataset image_train, image_val;
  try {
    std::tie(image_train, image_val) = image_splits(source);
  } catch (const std::exception& e) {
    std::cout << "cannot load image data: " << e.what() << std::endl;
  }

  report("clustering-preservation", clustering_preservation);
  std::optional<BenchOutcomes> bench;
  report("size-reduction", [&] {
    bench = bench_criteria();
    return bench->size;
  });
  report("speed-up", [&] { return bench ? bench->speed : Outcome{false, "benchmark did not run"}; });
  report("classification-preservation", [&] { return bench ? bench->knn : Outcome{false, "benchmark did not run"}; });
  report("order-preservation", [&] {
    IndexedDataset sample = image_val.size() ? image_val : image_train;
    return order_preservation(sample);
  });
  report("oracle-equivalence", oracle_equivalence);
  report("security-battery", [&] { return security_battery(image_train); });
  report("shape-conformance", [&] { return shape_conformance(image_train, image_val, source); });
  return failed == 0 ? 0 : 1;
}
