#pragma once

// Keyed, compressing, similarity-preserving sketches.
//
// Two constructions are provided:
//
//  * BinarySample: keyed sampling of n_out of the n_in input bits, a second
//    keyed shuffle of the output order, then XOR with a keyed mask. The mask
//    is shared by every record, so Hamming distances between sketches equal
//    Hamming distances between the sampled plaintext bits exactly.
//
//  * RealProjection: y = quantize(R (x - 127.5) + b) with R an n_out x n_in
//    keyed Rademacher matrix scaled by 1/sqrt(n_out) and b a keyed offset.
//    Quantization uses a fixed scale that depends only on n_in and n_out.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hai/bitvector.hpp"
#include "hai/keyed_stream.hpp"

namespace hai {

// Compression rate held as an exact decimal (e.g. "3", "2.94", "1.5").
class CompressionRate {
 public:
  static constexpr std::string_view kMin = "1.5";
  static constexpr std::string_view kMax = "16";

  // Accepts plain decimals only (no sign, exponent or whitespace) within
  // [1.5, 16]. Throws std::invalid_argument otherwise.
  static CompressionRate parse(std::string_view text);

  // Canonical text: no trailing fractional zeros, no trailing dot.
  [[nodiscard]] const std::string& text() const noexcept { return text_; }
  [[nodiscard]] double value() const noexcept;
  // floor(n / rate), computed exactly.
  [[nodiscard]] std::uint32_t divide_floor(std::uint32_t n) const noexcept;

  friend bool operator==(const CompressionRate& a, const CompressionRate& b) {
    return a.text_ == b.text_;
  }

 private:
  CompressionRate(std::string text, std::uint64_t numerator, std::uint64_t denominator)
      : text_(std::move(text)), numerator_(numerator), denominator_(denominator) {}

  std::string text_;
  std::uint64_t numerator_;
  std::uint64_t denominator_;
};

enum class Scheme : std::uint8_t { BinarySample, RealProjection };

[[nodiscard]] std::string_view scheme_name(Scheme s) noexcept;
[[nodiscard]] Scheme parse_scheme(std::string_view name);

struct SketchParams {
  Scheme scheme = Scheme::BinarySample;
  CompressionRate delta = CompressionRate::parse("3");
  std::uint32_t n_in = 0;
  std::uint32_t n_out = 0;
  std::uint32_t quant_bits = 8;

  // n_out defaults to floor(n_in / delta). An explicit n_out may be any value
  // in [8, n_in]. quant_bits is in [2, 8] and only meaningful for
  // RealProjection. Throws std::invalid_argument on violations.
  static SketchParams make(Scheme scheme, const CompressionRate& delta, std::uint32_t n_in,
                           std::optional<std::uint32_t> n_out = std::nullopt,
                           std::uint32_t quant_bits = 8);

  // Bytes per sketched record.
  [[nodiscard]] std::size_t output_bytes() const noexcept;

  friend bool operator==(const SketchParams&, const SketchParams&) = default;
};

// Keyed sample of n_out distinct positions from [0, n_in), in shuffle order.
[[nodiscard]] std::vector<std::uint32_t> derive_positions(const SecretKey& key, std::uint32_t n_in,
                                                          std::uint32_t n_out);

class IndexPermutation {
 public:
  IndexPermutation(std::int64_t class_id, std::vector<std::uint32_t> mapping);

  [[nodiscard]] std::int64_t class_id() const noexcept { return class_id_; }
  [[nodiscard]] std::uint32_t size() const noexcept { return static_cast<std::uint32_t>(mapping_.size()); }
  [[nodiscard]] std::uint32_t operator()(std::uint32_t i) const { return mapping_.at(i); }
  [[nodiscard]] std::span<const std::uint32_t> mapping() const noexcept { return mapping_; }
  [[nodiscard]] IndexPermutation inverse() const;
  [[nodiscard]] IndexPermutation compose(const IndexPermutation& then) const;
  [[nodiscard]] bool is_identity() const noexcept;

  friend bool operator==(const IndexPermutation&, const IndexPermutation&) = default;

 private:
  std::int64_t class_id_;
  std::vector<std::uint32_t> mapping_;
};

// Keyed full shuffle of [0, count) for one class.
[[nodiscard]] IndexPermutation derive_permutation(const SecretKey& key, std::int64_t class_id,
                                                  std::uint32_t count);

class BinarySketcher {
 public:
  BinarySketcher(const SecretKey& key, const SketchParams& params);

  [[nodiscard]] const SketchParams& params() const noexcept { return params_; }
  // Source bit for each output position (selection then output shuffle).
  [[nodiscard]] std::span<const std::uint32_t> sources() const noexcept { return sources_; }
  [[nodiscard]] const BitVector& mask() const noexcept { return mask_; }

  // Sampled and reordered bits, before masking.
  [[nodiscard]] BitVector select(const BitVector& x) const;
  [[nodiscard]] BitVector sketch(const BitVector& x) const;

 private:
  SketchParams params_;
  std::vector<std::uint32_t> sources_;
  BitVector mask_;
};

class RealSketcher {
 public:
  RealSketcher(const SecretKey& key, const SketchParams& params);

  [[nodiscard]] const SketchParams& params() const noexcept { return params_; }

  // R (x - 127.5) + b, before quantization.
  [[nodiscard]] std::vector<double> project(std::span<const std::uint8_t> x) const;
  // R (x - 127.5), without the keyed offset.
  [[nodiscard]] std::vector<double> project_centered(std::span<const std::uint8_t> x) const;
  [[nodiscard]] std::vector<std::uint8_t> quantize(std::span<const double> projected) const;
  [[nodiscard]] std::vector<std::uint8_t> sketch(std::span<const std::uint8_t> x) const;

  // Upper bound of the per-coordinate standard deviation of project_centered
  // over inputs in [0, 255]: 127.5 * sqrt(n_in / n_out).
  [[nodiscard]] double spread() const noexcept { return spread_; }
  // Quantization levels per projected unit.
  [[nodiscard]] double scale() const noexcept { return scale_; }
  [[nodiscard]] std::span<const double> offsets() const noexcept { return offsets_; }

 private:
  void check_input(std::span<const std::uint8_t> x) const;

  SketchParams params_;
  std::vector<std::int8_t> signs_;  // n_out x n_in, row-major
  std::vector<double> offsets_;
  double spread_ = 0;
  double scale_ = 0;
};

// Either construction, selected by params.scheme; works on raw payload bytes
// (packed MSB-first bits or u8 elements).
class Sketcher {
 public:
  Sketcher(const SecretKey& key, const SketchParams& params);

  [[nodiscard]] const SketchParams& params() const noexcept;
  [[nodiscard]] std::vector<std::uint8_t> sketch_payload(std::span<const std::uint8_t> payload) const;

  [[nodiscard]] const BinarySketcher* binary() const noexcept { return std::get_if<BinarySketcher>(&impl_); }
  [[nodiscard]] const RealSketcher* real() const noexcept { return std::get_if<RealSketcher>(&impl_); }

 private:
  std::variant<BinarySketcher, RealSketcher> impl_;
};

enum class SimilarityMeasure { HammingSimilarity, AndCount, Euclidean, Cosine };

[[nodiscard]] std::string_view measure_name(SimilarityMeasure m) noexcept;
[[nodiscard]] SimilarityMeasure parse_measure(std::string_view name);

// Larger is more similar for every measure. On bit vectors: HammingSimilarity
// = n - d_H, AndCount = popcount(a & b), Euclidean = -sqrt(d_H), Cosine =
// AndCount / sqrt(|a||b|). Cosine of a zero vector is 1 against another zero
// vector and 0 otherwise.
[[nodiscard]] double similarity(SimilarityMeasure m, const BitVector& a, const BitVector& b);
// Real vectors support Euclidean (negated L2 distance) and Cosine only.
[[nodiscard]] double similarity(SimilarityMeasure m, std::span<const double> a, std::span<const double> b);

}  // namespace hai
