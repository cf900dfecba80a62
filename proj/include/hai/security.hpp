#pragma once

// Attack harnesses against protected datasets: brute-force preimages, key
// avalanche, distance-profile linkage, guided malleability and model
// extraction. Every attack is deterministic given its seed.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "hai/bitvector.hpp"
#include "hai/dataset.hpp"
#include "hai/keyed_stream.hpp"
#include "hai/ml.hpp"
#include "hai/sketch.hpp"

namespace hai {

using Json = nlohmann::ordered_json;

struct AttackReport {
  std::string name;
  std::uint64_t trials = 0;
  std::uint64_t success_count = 0;
  double success_rate = 0;
  double baseline_rate = 0;
  std::uint64_t seed = 0;
  Json params = Json::object();
  std::map<std::string, double> metrics;
  double wall_ms = 0;

  // success_rate is recomputed from the counts (0 when trials == 0).
  void finish();

  [[nodiscard]] Json to_json() const;
  static AttackReport from_json(const Json& j);
  // Serialized form without wall_ms; equal for reruns with equal inputs.
  [[nodiscard]] std::string deterministic_dump() const;
};

// Exhaustive search over all 2^n_in inputs for those whose BinarySample
// sketch equals `sketch`. Throws std::invalid_argument for n_in > 24 or a
// non-binary scheme.
[[nodiscard]] std::uint64_t count_preimages(const BitVector& sketch, const SketchParams& params,
                                            const SecretKey& key);

struct PreimageOptions {
  std::uint32_t targets = 16;        // random plaintexts per run
  std::uint32_t candidate_keys = 100;  // keyless mode only
  bool with_key = false;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

// With the key: counts preimages of each target's sketch (metrics
// preimages_min/max, expected_preimages); the guess is one preimage with the
// unsampled bits drawn at random, baseline 2^-(n_in - n_out).
// Without the key: inverts the sketch under each candidate key; metrics
// mean_bit_recovery (over all target/key pairs) and max_bit_recovery (best
// candidate key, averaged over targets), baseline 2^-n_in.
// Success is exact recovery of the plaintext.
[[nodiscard]] AttackReport preimage_bruteforce(const SketchParams& params, const SecretKey& key,
                                               const PreimageOptions& opts);

enum class ProfileScore { Correlation, Distance };
enum class Assignment { Greedy, Hungarian };

struct LinkageOptions {
  ProfileScore score = ProfileScore::Correlation;
  Assignment assignment = Assignment::Greedy;
  unsigned threads = 1;
};

// Re-identification by sorted pairwise-distance profiles. `truth` maps each
// plaintext index to the protected index it was published under. Distances
// are normalized Hamming for bit payloads and L2 / sqrt(length) for u8
// payloads, each rescaled by its dataset's mean. Baseline 1/count.
// Throws std::invalid_argument on a count mismatch or empty input.
[[nodiscard]] AttackReport linkage_attack(const IndexedDataset& plain, const IndexedDataset& protected_set,
                                          const IndexTransposition& truth, const LinkageOptions& opts = {});

struct AvalancheOptions {
  std::uint32_t key_pairs = 100;
  bool same_key = false;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

// Sketches each record under pairs of independent keys. One trial per
// (record, key pair): normalized Hamming distance for BinarySample, Pearson
// correlation for RealProjection. A trial succeeds when the statistic leaves
// its ideal band (|d - 0.5| > 0.02, |rho| > 0.05); the baseline is that
// probability for independent uniform outputs under the normal approximation.
// Metrics: mean_statistic, mean_abs_deviation, max_abs_deviation.
[[nodiscard]] AttackReport key_avalanche(const SketchParams& params, const IndexedDataset& sample,
                                         const AvalancheOptions& opts);

struct MalleabilityOptions {
  std::uint32_t trials = 200;
  // Bits flipped per trial; nullopt flips every differing bit.
  std::optional<std::uint32_t> budget;
  std::uint64_t seed = 1;
};

// Admissibility threshold: 99th percentile (nearest rank) of the Hamming
// distance from each record of `model_data` to its nearest center. Each
// trial draws a probe from `probes` and a target cluster uniformly, then
// flips up to `budget` randomly chosen bits where the probe differs from the
// target center. Success: the result is nearest to the target and within the
// threshold. The baseline is the same test with no flips.
[[nodiscard]] AttackReport malleability_probe(const IndexedDataset& model_data, std::span<const BitVector> centers,
                                              const IndexedDataset& probes, const MalleabilityOptions& opts);

// Trains k-modes on both samples, matches centers (exhaustively for k <= 8,
// greedily otherwise) and classifies sample B with model A. Metrics:
// center_similarity (1 - mean normalized distance of matched centers),
// center_distance, cross_rand_index. Success per B record: the matched
// A-cluster equals its B-cluster; baseline 1/k. Throws std::invalid_argument
// on empty, non-binary or length-mismatched samples.
[[nodiscard]] AttackReport model_extraction_check(const IndexedDataset& sample_a, const IndexedDataset& sample_b,
                                                  const KModesConfig& cfg);

}  // namespace hai
