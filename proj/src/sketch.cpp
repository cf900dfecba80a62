#include "hai/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hai/random.hpp"

namespace hai {
namespace {

std::string canonical_decimal(std::string_view text, std::uint64_t& numerator, std::uint64_t& denominator) {
  if (text.empty()) throw std::invalid_argument("compression rate: empty string");
  const auto dot = text.find('.');
  std::string_view int_part = text.substr(0, dot);
  std::string_view frac_part = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (int_part.empty()) throw std::invalid_argument("compression rate: missing integer part");
  if (dot != std::string_view::npos && frac_part.empty()) {
    throw std::invalid_argument("compression rate: missing fractional digits");
  }
  auto all_digits = [](std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (!all_digits(int_part) || !all_digits(frac_part)) {
    throw std::invalid_argument("compression rate: '" + std::string(text) + "' is not a plain decimal");
  }
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.remove_suffix(1);
  while (int_part.size() > 1 && int_part.front() == '0') int_part.remove_prefix(1);
  if (int_part.size() > 6 || frac_part.size() > 9) {
    throw std::invalid_argument("compression rate: too many digits");
  }
  numerator = 0;
  denominator = 1;
  for (char c : int_part) numerator = numerator * 10 + static_cast<std::uint64_t>(c - '0');
  for (char c : frac_part) {
    numerator = numerator * 10 + static_cast<std::uint64_t>(c - '0');
    denominator *= 10;
  }
  std::string canon(int_part);
  if (!frac_part.empty()) {
    canon += '.';
    canon += frac_part;
  }
  return canon;
}

std::uint32_t bits_or_bytes_ceil(std::uint32_t bits) { return (bits + 7) / 8; }

DomainTag params_tag(std::string_view prefix, std::uint32_t n_in, std::uint32_t n_out) {
  DomainTag t(prefix);
  t.add_u32(n_in).add_u32(n_out);
  return t;
}

}  // namespace

CompressionRate CompressionRate::parse(std::string_view text) {
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  std::string canon = canonical_decimal(text, num, den);
  // 1.5 <= num/den <= 16, compared exactly.
  if (2 * num < 3 * den || num > 16 * den) {
    throw std::invalid_argument("compression rate " + canon + " outside [1.5, 16]");
  }
  return CompressionRate(std::move(canon), num, den);
}

double CompressionRate::value() const noexcept {
  return static_cast<double>(numerator_) / static_cast<double>(denominator_);
}

std::uint32_t CompressionRate::divide_floor(std::uint32_t n) const noexcept {
  return static_cast<std::uint32_t>((std::uint64_t{n} * denominator_) / numerator_);
}

std::string_view scheme_name(Scheme s) noexcept {
  return s == Scheme::BinarySample ? "binary-sample" : "real-projection";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "binary-sample" || name == "binary") return Scheme::BinarySample;
  if (name == "real-projection" || name == "real") return Scheme::RealProjection;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

SketchParams SketchParams::make(Scheme scheme, const CompressionRate& delta, std::uint32_t n_in,
                                std::optional<std::uint32_t> n_out, std::uint32_t quant_bits) {
  SketchParams p;
  p.scheme = scheme;
  p.delta = delta;
  p.n_in = n_in;
  p.n_out = n_out.value_or(delta.divide_floor(n_in));
  p.quant_bits = quant_bits;
  if (p.n_out < 8) {
    throw std::invalid_argument("sketch output length " + std::to_string(p.n_out) + " is below 8");
  }
  if (p.n_out > n_in) {
    throw std::invalid_argument("sketch output length " + std::to_string(p.n_out) +
                                " exceeds input length " + std::to_string(n_in));
  }
  if (quant_bits < 2 || quant_bits > 8) {
    throw std::invalid_argument("quant_bits must be in [2, 8]");
  }
  return p;
}

std::size_t SketchParams::output_bytes() const noexcept {
  return scheme == Scheme::BinarySample ? bits_or_bytes_ceil(n_out) : n_out;
}

std::vector<std::uint32_t> derive_positions(const SecretKey& key, std::uint32_t n_in, std::uint32_t n_out) {
  if (n_out > n_in) {
    throw std::invalid_argument("derive_positions: n_out " + std::to_string(n_out) + " exceeds n_in " +
                                std::to_string(n_in));
  }
  KeyedRng rng(key, params_tag("pos", n_in, n_out));
  return partial_shuffle(rng, n_in, n_out);
}

IndexPermutation::IndexPermutation(std::int64_t class_id, std::vector<std::uint32_t> mapping)
    : class_id_(class_id), mapping_(std::move(mapping)) {
  std::vector<bool> seen(mapping_.size(), false);
  for (auto v : mapping_) {
    if (v >= mapping_.size() || seen[v]) throw std::invalid_argument("IndexPermutation: not a bijection");
    seen[v] = true;
  }
}

IndexPermutation IndexPermutation::inverse() const {
  std::vector<std::uint32_t> inv(mapping_.size());
  for (std::uint32_t i = 0; i < mapping_.size(); ++i) inv[mapping_[i]] = i;
  return IndexPermutation(class_id_, std::move(inv));
}

IndexPermutation IndexPermutation::compose(const IndexPermutation& then) const {
  if (then.size() != size()) throw std::invalid_argument("IndexPermutation::compose: size mismatch");
  std::vector<std::uint32_t> out(mapping_.size());
  for (std::uint32_t i = 0; i < mapping_.size(); ++i) out[i] = then.mapping_[mapping_[i]];
  return IndexPermutation(class_id_, std::move(out));
}

bool IndexPermutation::is_identity() const noexcept {
  for (std::uint32_t i = 0; i < mapping_.size(); ++i) {
    if (mapping_[i] != i) return false;
  }
  return true;
}

IndexPermutation derive_permutation(const SecretKey& key, std::int64_t class_id, std::uint32_t count) {
  if (count == 0) throw std::invalid_argument("derive_permutation: count must be at least 1");
  DomainTag tag("perm");
  tag.add_u64(static_cast<std::uint64_t>(class_id)).add_u32(count);
  KeyedRng rng(key, tag);
  return IndexPermutation(class_id, partial_shuffle(rng, count, count));
}

BinarySketcher::BinarySketcher(const SecretKey& key, const SketchParams& params)
    : params_(params), mask_(params.n_out) {
  if (params.scheme != Scheme::BinarySample) {
    throw std::invalid_argument("BinarySketcher requires the binary-sample scheme");
  }
  const auto positions = derive_positions(key, params.n_in, params.n_out);
  KeyedRng order_rng(key, params_tag("order", params.n_in, params.n_out));
  const auto order = partial_shuffle(order_rng, params.n_out, params.n_out);
  sources_.resize(params.n_out);
  for (std::uint32_t j = 0; j < params.n_out; ++j) sources_[j] = positions[order[j]];

  KeyedRng mask_rng(key, params_tag("mask", params.n_in, params.n_out));
  for (auto& w : mask_.mutable_words()) w = mask_rng();
  mask_.canonicalize();
}

BitVector BinarySketcher::select(const BitVector& x) const {
  if (x.size() != params_.n_in) {
    throw std::invalid_argument("sketch_binary: input has " + std::to_string(x.size()) + " bits, expected " +
                                std::to_string(params_.n_in));
  }
  BitVector out(params_.n_out);
  const auto in = x.words();
  auto ow = out.mutable_words();
  for (std::uint32_t j = 0; j < params_.n_out; ++j) {
    const std::uint32_t s = sources_[j];
    ow[j / 64] |= ((in[s / 64] >> (s % 64)) & 1U) << (j % 64);
  }
  return out;
}

BitVector BinarySketcher::sketch(const BitVector& x) const {
  BitVector out = select(x);
  out ^= mask_;
  return out;
}

RealSketcher::RealSketcher(const SecretKey& key, const SketchParams& params) : params_(params) {
  if (params.scheme != Scheme::RealProjection) {
    throw std::invalid_argument("RealSketcher requires the real-projection scheme");
  }
  const std::size_t n_in = params.n_in;
  const std::size_t n_out = params.n_out;
  signs_.resize(n_in * n_out);
  KeyedRng proj_rng(key, params_tag("proj", params.n_in, params.n_out));
  for (std::size_t base = 0; base < signs_.size(); base += 64) {
    std::uint64_t bits = proj_rng();
    const std::size_t end = std::min(signs_.size(), base + 64);
    for (std::size_t i = base; i < end; ++i, bits >>= 1) signs_[i] = (bits & 1U) ? 1 : -1;
  }
  spread_ = 127.5 * std::sqrt(static_cast<double>(n_in) / static_cast<double>(n_out));
  const double half_range = (std::ldexp(1.0, static_cast<int>(params.quant_bits)) - 1.0) / 2.0;
  scale_ = half_range / (4.0 * spread_);
  KeyedRng offset_rng(key, params_tag("offset", params.n_in, params.n_out));
  offsets_.resize(n_out);
  for (auto& b : offsets_) b = (uniform01(offset_rng) - 0.5) * spread_;
}

void RealSketcher::check_input(std::span<const std::uint8_t> x) const {
  if (x.size() != params_.n_in) {
    throw std::invalid_argument("sketch_real: input has " + std::to_string(x.size()) + " elements, expected " +
                                std::to_string(params_.n_in));
  }
}

std::vector<double> RealSketcher::project_centered(std::span<const std::uint8_t> x) const {
  check_input(x);
  const std::size_t n_in = params_.n_in;
  const double denom = 2.0 * std::sqrt(static_cast<double>(params_.n_out));
  std::vector<double> out(params_.n_out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::int8_t* row = signs_.data() + i * n_in;
    std::int64_t acc = 0;  // sum of s * (2x - 255), exact
    for (std::size_t j = 0; j < n_in; ++j) acc += row[j] * (2 * static_cast<int>(x[j]) - 255);
    out[i] = static_cast<double>(acc) / denom;
  }
  return out;
}

std::vector<double> RealSketcher::project(std::span<const std::uint8_t> x) const {
  auto z = project_centered(x);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += offsets_[i];
  return z;
}

std::vector<std::uint8_t> RealSketcher::quantize(std::span<const double> projected) const {
  if (projected.size() != params_.n_out) throw std::invalid_argument("quantize: length mismatch");
  const double top = std::ldexp(1.0, static_cast<int>(params_.quant_bits)) - 1.0;
  const double mid = top / 2.0;
  std::vector<std::uint8_t> out(projected.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double q = std::clamp(std::floor(mid + projected[i] * scale_ + 0.5), 0.0, top);
    out[i] = static_cast<std::uint8_t>(q);
  }
  return out;
}

std::vector<std::uint8_t> RealSketcher::sketch(std::span<const std::uint8_t> x) const {
  return quantize(project(x));
}

namespace {
std::variant<BinarySketcher, RealSketcher> make_impl(const SecretKey& key, const SketchParams& params) {
  if (params.scheme == Scheme::BinarySample) return BinarySketcher(key, params);
  return RealSketcher(key, params);
}
}  // namespace

Sketcher::Sketcher(const SecretKey& key, const SketchParams& params) : impl_(make_impl(key, params)) {}

const SketchParams& Sketcher::params() const noexcept {
  return std::visit([](const auto& s) -> const SketchParams& { return s.params(); }, impl_);
}

std::vector<std::uint8_t> Sketcher::sketch_payload(std::span<const std::uint8_t> payload) const {
  if (const auto* b = binary()) {
    const auto& p = b->params();
    if (payload.size() != bits_or_bytes_ceil(p.n_in)) {
      throw std::invalid_argument("payload has " + std::to_string(payload.size()) + " bytes, expected " +
                                  std::to_string(bits_or_bytes_ceil(p.n_in)));
    }
    return b->sketch(BitVector::from_bytes(payload, p.n_in)).to_bytes();
  }
  return real()->sketch(payload);
}

std::string_view measure_name(SimilarityMeasure m) noexcept {
  switch (m) {
    case SimilarityMeasure::HammingSimilarity: return "hamming";
    case SimilarityMeasure::AndCount: return "and-count";
    case SimilarityMeasure::Euclidean: return "euclidean";
    case SimilarityMeasure::Cosine: return "cosine";
  }
  return "unknown";
}

SimilarityMeasure parse_measure(std::string_view name) {
  if (name == "hamming") return SimilarityMeasure::HammingSimilarity;
  if (name == "and-count" || name == "and") return SimilarityMeasure::AndCount;
  if (name == "euclidean") return SimilarityMeasure::Euclidean;
  if (name == "cosine") return SimilarityMeasure::Cosine;
  throw std::invalid_argument("unknown similarity measure '" + std::string(name) + "'");
}

double similarity(SimilarityMeasure m, const BitVector& a, const BitVector& b) {
  switch (m) {
    case SimilarityMeasure::HammingSimilarity:
      return static_cast<double>(a.size() - hamming(a, b));
    case SimilarityMeasure::AndCount:
      return static_cast<double>(and_similarity(a, b));
    case SimilarityMeasure::Euclidean:
      return -std::sqrt(static_cast<double>(hamming(a, b)));
    case SimilarityMeasure::Cosine: {
      const auto inter = and_similarity(a, b);
      const auto na = popcount(a);
      const auto nb = popcount(b);
      if (na == 0 || nb == 0) return (na == 0 && nb == 0) ? 1.0 : 0.0;
      return static_cast<double>(inter) / std::sqrt(static_cast<double>(na) * static_cast<double>(nb));
    }
  }
  throw std::invalid_argument("unknown similarity measure");
}

double similarity(SimilarityMeasure m, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("similarity: length mismatch");
  switch (m) {
    case SimilarityMeasure::Euclidean: {
      double s = 0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return -std::sqrt(s);
    }
    case SimilarityMeasure::Cosine: {
      double dot = 0, na = 0, nb = 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
      }
      if (na == 0 || nb == 0) return (na == 0 && nb == 0) ? 1.0 : 0.0;
      return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
    }
    case SimilarityMeasure::HammingSimilarity:
    case SimilarityMeasure::AndCount:
      throw std::invalid_argument(std::string(measure_name(m)) + " is only defined for bit vectors");
  }
  throw std::invalid_argument("unknown similarity measure");
}

}  // namespace hai
