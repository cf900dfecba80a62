#pragma once

// Plaintext vs protected evaluation: the same k-modes and k-NN pipeline runs
// on both sides with equal iteration budgets, and results on protected
// records are transposed back to plaintext indexes before comparison.

#include <cstdint>
#include <string>
#include <vector>

#include "hai/dataset.hpp"
#include "hai/keyed_stream.hpp"
#include "hai/ml.hpp"
#include "hai/security.hpp"
#include "hai/sketch.hpp"

namespace hai {

inline constexpr const char* kToolVersion = "0.1.0";

struct BenchConfig {
  std::string train_id = "train";
  std::string val_id = "val";
  CompressionRate delta = CompressionRate::parse("3");
  std::optional<std::uint32_t> n_out;
  bool permute_classes = true;
  KModesConfig kmodes;
  std::uint32_t knn_k = 5;
  SimilarityMeasure knn_measure = SimilarityMeasure::HammingSimilarity;
  std::uint32_t runs = 5;
  unsigned threads = 1;
};

struct PhaseTiming {
  double plaintext_ms = 0;  // median
  double protected_ms = 0;  // median
  std::vector<double> plaintext_samples;
  std::vector<double> protected_samples;
};

struct EvalReport {
  std::string train_id;
  std::string val_id;
  std::string delta;
  std::uint32_t n_in = 0;
  std::uint32_t n_out = 0;
  std::uint64_t plaintext_bytes = 0;  // HAI1 file size
  std::uint64_t protected_bytes = 0;
  std::uint64_t plaintext_payload_bytes = 0;
  std::uint64_t protected_payload_bytes = 0;
  double size_ratio = 0;
  double payload_ratio = 0;
  PhaseTiming kmodes;
  PhaseTiming knn;
  double speedup = 0;  // k-modes plaintext / protected
  double rand_index = 0;
  double knn_agreement = 0;
  std::uint32_t train_records = 0;
  std::uint32_t val_records = 0;
  std::uint64_t kmodes_seed = 0;
  std::uint32_t kmodes_iterations = 0;
  std::uint32_t knn_k = 0;

  [[nodiscard]] Json to_json() const;
  // Without timings and speedup; equal for reruns with equal inputs.
  [[nodiscard]] Json deterministic_json() const;
  [[nodiscard]] std::string table() const;
};

double median(std::vector<double> samples);

// Runs the pipeline on plaintext bit datasets and their BinarySample
// protection under `key`. Throws std::invalid_argument for non-bit inputs,
// unlabeled training records or runs == 0.
[[nodiscard]] EvalReport run_bench(const IndexedDataset& train, const IndexedDataset& val, const SecretKey& key,
                                   const BenchConfig& cfg);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// rand_index >= 0.98, speedup >= 2.0, knn_agreement >= 0.98,
// size_ratio in [2.8, 3.2].
[[nodiscard]] std::vector<CheckResult> check_report(const EvalReport& report);

}  // namespace hai
