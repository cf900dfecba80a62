#include "hai/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "hai/parallel.hpp"

namespace hai {
namespace {

using Clock = std::chrono::steady_clock;

template <class Fn>
double time_ms(Fn&& fn) {
  const auto start = Clock::now();
  fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::uint64_t payload_bytes(const IndexedDataset& ds) {
  std::uint64_t total = 0;
  for (const auto& r : ds.records) total += r.payload.size();
  return total;
}

Json timing_json(const PhaseTiming& t) {
  return Json{{"plaintext_ms", t.plaintext_ms},
              {"protected_ms", t.protected_ms},
              {"plaintext_samples_ms", t.plaintext_samples},
              {"protected_samples_ms", t.protected_samples}};
}

}  // namespace

double median(std::vector<double> samples) {
  if (samples.empty()) return 0;
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  return n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

Json EvalReport::deterministic_json() const {
  return Json{{"report_version", 1},
              {"tool_version", kToolVersion},
              {"datasets", {{"train", train_id}, {"val", val_id}}},
              {"scheme", "binary-sample"},
              {"delta", delta},
              {"n_in", n_in},
              {"n_out", n_out},
              {"records", {{"train", train_records}, {"val", val_records}}},
              {"sizes",
               {{"plaintext_bytes", plaintext_bytes},
                {"protected_bytes", protected_bytes},
                {"plaintext_payload_bytes", plaintext_payload_bytes},
                {"protected_payload_bytes", protected_payload_bytes}}},
              {"size_ratio", size_ratio},
              {"payload_ratio", payload_ratio},
              {"rand_index", rand_index},
              {"knn_agreement", knn_agreement},
              {"seeds", {{"kmodes", kmodes_seed}}},
              {"config", {{"kmodes_iterations", kmodes_iterations}, {"knn_k", knn_k}}}};
}

Json EvalReport::to_json() const {
  Json j = deterministic_json();
  j["timings"] = Json{{"kmodes", timing_json(kmodes)}, {"knn", timing_json(knn)}};
  j["speedup"] = speedup;
  return j;
}

std::string EvalReport::table() const {
  char buf[256];
  std::string out;
  auto line = [&](const char* name, double plain, double prot, double ratio) {
    std::snprintf(buf, sizeof buf, "%-14s %14.3f %14.3f %10.3f\n", name, plain, prot, ratio);
    out += buf;
  };
  std::snprintf(buf, sizeof buf, "%-14s %14s %14s %10s\n", "measure", "plaintext", "protected", "ratio");
  out += buf;
  line("bytes", double(plaintext_bytes), double(protected_bytes), size_ratio);
  line("payload bytes", double(plaintext_payload_bytes), double(protected_payload_bytes), payload_ratio);
  line("k-modes ms", kmodes.plaintext_ms, kmodes.protected_ms, speedup);
  line("k-NN ms", knn.plaintext_ms, knn.protected_ms,
       knn.protected_ms > 0 ? knn.plaintext_ms / knn.protected_ms : 0.0);
  std::snprintf(buf, sizeof buf, "rand index     %.6f\nk-NN agreement %.6f\n", rand_index, knn_agreement);
  out += buf;
  return out;
}

EvalReport run_bench(const IndexedDataset& train, const IndexedDataset& val, const SecretKey& key,
                     const BenchConfig& cfg) {
  if (train.meta.scheme != ContainerScheme::PlainBits || val.meta.scheme != ContainerScheme::PlainBits) {
    throw std::invalid_argument("bench needs plaintext bit datasets");
  }
  if (train.meta.n_in != val.meta.n_in) throw std::invalid_argument("train and val differ in record length");
  if (cfg.runs == 0) throw std::invalid_argument("bench needs at least one run");
  const unsigned threads = resolve_threads(cfg.threads);

  const auto params = SketchParams::make(Scheme::BinarySample, cfg.delta, train.meta.n_in, cfg.n_out);
  const Sketcher sketcher(key, params);
  const auto ptrain = protect_dataset(train, sketcher, cfg.permute_classes, key, threads);
  const auto pval = protect_dataset(val, sketcher, cfg.permute_classes, key, threads);
  const auto train_map = derive_transposition(key, train, cfg.permute_classes);
  const auto val_map = derive_transposition(key, val, cfg.permute_classes);

  EvalReport r;
  r.train_id = cfg.train_id;
  r.val_id = cfg.val_id;
  r.delta = params.delta.text();
  r.n_in = params.n_in;
  r.n_out = params.n_out;
  r.train_records = static_cast<std::uint32_t>(train.size());
  r.val_records = static_cast<std::uint32_t>(val.size());
  r.kmodes_seed = cfg.kmodes.seed;
  r.kmodes_iterations = cfg.kmodes.iterations;
  r.knn_k = cfg.knn_k;
  r.plaintext_bytes = serialize_hai1(train).size();
  r.protected_bytes = serialize_hai1(ptrain).size();
  r.plaintext_payload_bytes = payload_bytes(train);
  r.protected_payload_bytes = payload_bytes(ptrain);
  r.size_ratio = double(r.plaintext_bytes) / double(r.protected_bytes);
  r.payload_ratio = double(r.plaintext_payload_bytes) / double(r.protected_payload_bytes);

  const auto plain_rows = train.bit_rows();
  const auto prot_rows = ptrain.bit_rows();
  const auto plain_idx = train.indexes();
  const auto prot_idx = ptrain.indexes();
  KModesConfig kcfg = cfg.kmodes;
  kcfg.threads = threads;

  KModesResult plain_km;
  KModesResult prot_km;
  for (std::uint32_t run = 0; run < cfg.runs; ++run) {
    r.kmodes.plaintext_samples.push_back(time_ms([&] { plain_km = kmodes(plain_rows, plain_idx, kcfg); }));
    r.kmodes.protected_samples.push_back(time_ms([&] { prot_km = kmodes(prot_rows, prot_idx, kcfg); }));
  }
  r.kmodes.plaintext_ms = median(r.kmodes.plaintext_samples);
  r.kmodes.protected_ms = median(r.kmodes.protected_samples);
  r.speedup = r.kmodes.protected_ms > 0 ? r.kmodes.plaintext_ms / r.kmodes.protected_ms : 0.0;
  r.rand_index = rand_index(plain_km.partition, transpose_partition(prot_km.partition, train_map));

  if (train.has_labels() && val.size() > 0) {
    const auto plain_labels = train.labels();
    const auto prot_labels = ptrain.labels();
    const auto plain_q = val.bit_rows();
    const auto prot_q = pval.bit_rows();
    std::vector<std::uint32_t> plain_pred;
    std::vector<std::uint32_t> prot_pred;
    for (std::uint32_t run = 0; run < cfg.runs; ++run) {
      r.knn.plaintext_samples.push_back(time_ms([&] {
        plain_pred = knn_batch(plain_rows, plain_labels, plain_q, cfg.knn_k, cfg.knn_measure, threads);
      }));
      r.knn.protected_samples.push_back(time_ms([&] {
        prot_pred = knn_batch(prot_rows, prot_labels, prot_q, cfg.knn_k, cfg.knn_measure, threads);
      }));
    }
    r.knn.plaintext_ms = median(r.knn.plaintext_samples);
    r.knn.protected_ms = median(r.knn.protected_samples);

    std::unordered_map<std::uint32_t, std::uint32_t> by_protected;
    for (std::size_t i = 0; i < pval.size(); ++i) by_protected[pval.records[i].index] = prot_pred[i];
    std::size_t agree = 0;
    for (std::size_t i = 0; i < val.size(); ++i) {
      const auto q = val_map.to_protected(val.records[i].index);
      if (q && by_protected.at(*q) == plain_pred[i]) ++agree;
    }
    r.knn_agreement = double(agree) / double(val.size());
  }
  return r;
}

std::vector<CheckResult> check_report(const EvalReport& report) {
  // Size bounds scale with delta; at delta 3 they are [2.8, 3.2].
  const double delta = CompressionRate::parse(report.delta).value();
  const double lo = 2.8 / 3.0 * delta;
  const double hi = 3.2 / 3.0 * delta;
  char buf[160];
  std::vector<CheckResult> out;
  auto at_least = [&](const char* name, double v, double bound) {
    std::snprintf(buf, sizeof buf, "%.6f >= %.2f", v, bound);
    out.push_back({name, v >= bound, buf});
  };
  at_least("rand_index", report.rand_index, 0.98);
  at_least("speedup", report.speedup, 2.0);
  at_least("knn_agreement", report.knn_agreement, 0.98);
  std::snprintf(buf, sizeof buf, "%.4f in [%.3f, %.3f]", report.size_ratio, lo, hi);
  out.push_back({"size_ratio", report.size_ratio >= lo && report.size_ratio <= hi, buf});
  return out;
}

}  // namespace hai
