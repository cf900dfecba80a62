#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "hai/errors.hpp"
#include "hai/security.hpp"
#include "support.hpp"

namespace hai {
namespace {

IndexedDataset cyber(std::uint32_t n_train, std::uint32_t n_feat, std::uint64_t seed = 1, double p_flip = 0.1) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_train = n_train;
  cfg.n_val = 2;
  cfg.n_feat = n_feat;
  cfg.p_flip = p_flip;
  return gen_synthetic_cyber(cfg).first;
}

IndexedDataset protect(const IndexedDataset& ds, const SecretKey& key, const char* delta = "3") {
  const auto params = SketchParams::make(Scheme::BinarySample, CompressionRate::parse(delta), ds.meta.n_in);
  return protect_dataset(ds, Sketcher(key, params), true, key);
}

// Brute-force preimage count over every input, independent of the library's
// own enumeration.
std::uint64_t naive_preimages(const BinarySketcher& sk, const BitVector& y, std::uint32_t n_in) {
  std::uint64_t c = 0;
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << n_in); ++x) {
    BitVector v(n_in);
    for (std::uint32_t b = 0; b < n_in; ++b) {
      if ((x >> b) & 1) v.set(b);
    }
    c += sk.sketch(v) == y;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Preimages

TEST(Preimage, CountIsTwoToTheDroppedBits) {
  std::mt19937_64 rng(1);
  for (std::uint32_t n_out : {8u, 10u, 12u}) {
    const auto params = SketchParams::make(Scheme::BinarySample, CompressionRate::parse("1.5"), 12, n_out);
    const auto key = SecretKey::from_seed(n_out);
    const BinarySketcher sk(key, params);
    for (int t = 0; t < 3; ++t) {
      const auto y = sk.sketch(test::to_vector(test::random_bits(rng, 12)));
      const auto got = count_preimages(y, params, key);
      EXPECT_EQ(got, std::uint64_t{1} << (12 - n_out));
      EXPECT_EQ(got, naive_preimages(sk, y, 12));
    }
  }
}

TEST(Preimage, WithKeyReport) {
  const auto params = SketchParams::make(Scheme::BinarySample, CompressionRate::parse("2"), 16);
  PreimageOptions opts;
  opts.with_key = true;
  opts.targets = 32;
  const auto r = preimage_bruteforce(params, SecretKey::from_seed(4), opts);
  EXPECT_EQ(r.trials, 32u);
  EXPECT_EQ(r.metrics.at("preimages_min"), 256.0);
  EXPECT_EQ(r.metrics.at("preimages_max"), 256.0);
  EXPECT_DOUBLE_EQ(r.baseline_rate, 1.0 / 256);
  EXPECT_LE(r.success_count, 3u);  // each guess is right with probability 1/256

  const auto full = SketchParams::make(Scheme::BinarySample, CompressionRate::parse("1.5"), 16, 16);
  const auto rf = preimage_bruteforce(full, SecretKey::from_seed(4), opts);
  EXPECT_EQ(rf.metrics.at("preimages_max"), 1.0);
  EXPECT_DOUBLE_EQ(rf.success_rate, 1.0);
}

TEST(Preimage, KeylessRecoveryIsChance) {
  const auto params = SketchParams::make(Scheme::BinarySample, CompressionRate::parse("2"), 24);
  PreimageOptions opts;
  opts.targets = 16;
  opts.candidate_keys = 100;
  const auto r = preimage_bruteforce(params, SecretKey::from_seed(5), opts);
  EXPECT_EQ(r.trials, 1600u);
  EXPECT_NEAR(r.metrics.at("mean_bit_recovery"), 0.5, 0.05);
  EXPECT_DOUBLE_EQ(r.baseline_rate, std::ldexp(1.0, -24));
  EXPECT_EQ(r.success_count, 0u);
}

TEST(Preimage, Errors) {
  const auto key = SecretKey::from_seed(1);
  EXPECT_THROW((void)preimage_bruteforce(SketchParams::make(Scheme::BinarySample, CompressionRate::parse("2"), 26),
                                         key, {}),
               std::invalid_argument);
  EXPECT_THROW((void)preimage_bruteforce(SketchParams::make(Scheme::RealProjection, CompressionRate::parse("2"), 20),
                                         key, {}),
               std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Avalanche

TEST(Avalanche, SameKeyIsIdentical) {
  const auto sample = cyber(20, 3000);
  const auto params = SketchParams::make(Scheme::BinarySample, CompressionRate::parse("3"), 3000);
  AvalancheOptions opts;
  opts.key_pairs = 5;
  opts.same_key = true;
  const auto r = key_avalanche(params, sample, opts);
  EXPECT_EQ(r.metrics.at("mean_statistic"), 0.0);
}

TEST(Avalanche, IndependentKeysDecorrelateBinary) {
  const auto sample = cyber(50, 49955);
  const auto params = SketchParams::make(Scheme::BinarySample, CompressionRate::parse("3"), 49955);
  AvalancheOptions opts;
  opts.key_pairs = 20;
  const auto r = key_avalanche(params, sample, opts);
  EXPECT_EQ(r.trials, 1000u);
  EXPECT_NEAR(r.metrics.at("mean_statistic"), 0.5, 0.005);
  EXPECT_LT(r.metrics.at("max_abs_deviation"), 0.02);
  EXPECT_LE(r.success_rate, 0.01);
}

TEST(Avalanche, IndependentKeysDecorrelateReal) {
  ImageSynthConfig cfg;
  cfg.n_train = 50;
  cfg.n_val = 1;
  const auto sample = gen_synthetic_images(cfg).first;
  const auto params = SketchParams::make(Scheme::RealProjection, CompressionRate::parse("3"), 784, 256);
  AvalancheOptions opts;
  opts.key_pairs = 100;
  const auto r = key_avalanche(params, sample, opts);
  EXPECT_LE(std::abs(r.metrics.at("mean_statistic")), 0.05);
  // Pearson over 256 outputs has sd 1/16, so some trials leave the band.
  EXPECT_NEAR(r.success_rate, r.baseline_rate, 0.1);

  opts.same_key = true;
  opts.key_pairs = 2;
  EXPECT_NEAR(key_avalanche(params, sample, opts).metrics.at("mean_statistic"), 1.0, 1e-9);
}

// ---------------------------------------------------------------------------
// Linkage

TEST(Linkage, ShuffleOnlyIsFullyLinkable) {
  const auto plain = cyber(100, 2000);
  const auto key = SecretKey::from_seed(7);
  const auto maps = derive_transposition(key, plain, true);
  IndexedDataset shuffled = plain;
  for (auto& r : shuffled.records) r.index = *maps.to_protected(r.index);
  for (auto assignment : {Assignment::Greedy, Assignment::Hungarian}) {
    LinkageOptions opts;
    opts.assignment = assignment;
    const auto r = linkage_attack(plain, shuffled, maps, opts);
    EXPECT_DOUBLE_EQ(r.success_rate, 1.0);
    EXPECT_DOUBLE_EQ(r.baseline_rate, 0.01);
  }
}

TEST(Linkage, SingleRecord) {
  const auto plain = cyber(2, 500);
  IndexedDataset one = plain;
  one.records.resize(1);
  const auto key = SecretKey::from_seed(8);
  const auto prot = protect(one, key);
  const auto r = linkage_attack(one, prot, derive_transposition(key, one, true));
  EXPECT_DOUBLE_EQ(r.success_rate, 1.0);
  EXPECT_DOUBLE_EQ(r.baseline_rate, 1.0);
}

TEST(Linkage, ProtectedDatasetReportsAgainstChance) {
  const auto plain = cyber(200, 4000);
  const auto key = SecretKey::from_seed(9);
  const auto prot = protect(plain, key);
  const auto maps = derive_transposition(key, plain, true);
  for (auto score : {ProfileScore::Correlation, ProfileScore::Distance}) {
    LinkageOptions opts;
    opts.score = score;
    const auto r = linkage_attack(plain, prot, maps, opts);
    EXPECT_EQ(r.trials, 200u);
    EXPECT_DOUBLE_EQ(r.baseline_rate, 1.0 / 200);
    EXPECT_DOUBLE_EQ(r.metrics.at("lift_over_baseline"), r.success_rate / r.baseline_rate);
  }
  IndexedDataset short_set = prot;
  short_set.records.pop_back();
  EXPECT_THROW((void)linkage_attack(plain, short_set, maps), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Malleability

TEST(Malleability, FlipBudgets) {
  const auto data = cyber(200, 2000);
  KModesConfig cfg;
  const auto model = kmodes(data.bit_rows(), cfg);
  MalleabilityOptions opts;
  opts.trials = 100;
  const auto all = malleability_probe(data, model.centers, data, opts);
  EXPECT_DOUBLE_EQ(all.success_rate, 1.0);
  EXPECT_GT(all.metrics.at("admissible_threshold"), 0.0);

  opts.budget = 0;
  const auto none = malleability_probe(data, model.centers, data, opts);
  EXPECT_DOUBLE_EQ(none.success_rate, none.baseline_rate);
  EXPECT_EQ(none.metrics.at("mean_flips"), 0.0);
  EXPECT_NEAR(none.success_rate, 0.5, 0.15);  // target drawn uniformly from two clusters
}

// ---------------------------------------------------------------------------
// Model extraction

TEST(Extraction, IdenticalSamplesAgreeFully) {
  const auto a = protect(cyber(100, 3000), SecretKey::from_seed(10));
  const auto r = model_extraction_check(a, a, KModesConfig{});
  EXPECT_DOUBLE_EQ(r.success_rate, 1.0);
  EXPECT_DOUBLE_EQ(r.metrics.at("center_distance"), 0.0);
  EXPECT_DOUBLE_EQ(r.baseline_rate, 0.5);
}

TEST(Extraction, DisjointSamplesSameKey) {
  const auto key = SecretKey::from_seed(11);
  const auto all = protect(cyber(400, 3000), key);
  IndexedDataset a = all, b = all;
  a.records.assign(all.records.begin(), all.records.begin() + 200);
  b.records.assign(all.records.begin() + 200, all.records.end());
  const auto r = model_extraction_check(a, b, KModesConfig{});
  EXPECT_GE(r.metrics.at("cross_rand_index"), 0.95);
  EXPECT_GE(r.success_rate, 0.95);
  EXPECT_LT(r.metrics.at("center_distance"), 0.1);
}

TEST(Extraction, IndependentKeysGiveUnrelatedCenters) {
  const auto plain = cyber(200, 3000);
  const auto a = protect(plain, SecretKey::from_seed(12));
  const auto b = protect(plain, SecretKey::from_seed(13));
  const auto r = model_extraction_check(a, b, KModesConfig{});
  EXPECT_NEAR(r.metrics.at("center_distance"), 0.5, 0.05);
  EXPECT_NEAR(r.metrics.at("center_similarity"), 0.5, 0.05);
}

// ---------------------------------------------------------------------------
// Reports

TEST(Report, JsonRoundTripAndDeterminism) {
  const auto params = SketchParams::make(Scheme::BinarySample, CompressionRate::parse("2"), 16);
  PreimageOptions opts;
  opts.candidate_keys = 5;
  opts.targets = 4;
  const auto a = preimage_bruteforce(params, SecretKey::from_seed(3), opts);
  const auto b = preimage_bruteforce(params, SecretKey::from_seed(3), opts);
  EXPECT_EQ(a.deterministic_dump(), b.deterministic_dump());

  const auto back = AttackReport::from_json(a.to_json());
  EXPECT_EQ(back.to_json().dump(), a.to_json().dump());
  EXPECT_EQ(back.metrics, a.metrics);

  opts.threads = 3;
  EXPECT_EQ(preimage_bruteforce(params, SecretKey::from_seed(3), opts).deterministic_dump(), a.deterministic_dump());

  EXPECT_THROW((void)AttackReport::from_json(Json::parse(R"({"name": 3})")), FormatError);
  EXPECT_THROW((void)AttackReport::from_json(Json::array()), FormatError);
  EXPECT_THROW((void)AttackReport::from_json(Json::parse(R"({"report_version": "1"})")), FormatError);
}

}  // namespace
}  // namespace hai
