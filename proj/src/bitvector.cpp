#include "hai/bitvector.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <stdexcept>
#include <string>

namespace hai {
namespace {

constexpr std::size_t words_for(std::size_t bits) { return (bits + 63) / 64; }

constexpr std::uint64_t tail_mask(std::size_t bits) {
  const std::size_t r = bits % 64;
  return r == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << r) - 1;
}

constexpr std::array<std::uint8_t, 256> make_reverse_table() {
  std::array<std::uint8_t, 256> t{};
  for (unsigned b = 0; b < 256; ++b) {
    unsigned r = 0;
    for (unsigned k = 0; k < 8; ++k) {
      if (b & (1u << k)) r |= 1u << (7 - k);
    }
    t[b] = static_cast<std::uint8_t>(r);
  }
  return t;
}

constexpr auto kReverse = make_reverse_table();

// SWAR popcount; the portable fallback path.
constexpr unsigned popcount64_scalar(std::uint64_t x) noexcept {
  x = x - ((x >> 1) & 0x5555555555555555ULL);
  x = (x & 0x3333333333333333ULL) + ((x >> 2) & 0x3333333333333333ULL);
  x = (x + (x >> 4)) & 0x0F0F0F0F0F0F0F0FULL;
  return static_cast<unsigned>((x * 0x0101010101010101ULL) >> 56);
}

struct ScalarOps {
  static std::size_t count(const std::uint64_t* w, std::size_t n) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += popcount64_scalar(w[i]);
    return c;
  }
  static std::size_t count_and(const std::uint64_t* a, const std::uint64_t* b, std::size_t n) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += popcount64_scalar(a[i] & b[i]);
    return c;
  }
  static std::size_t count_xor(const std::uint64_t* a, const std::uint64_t* b, std::size_t n) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += popcount64_scalar(a[i] ^ b[i]);
    return c;
  }
};

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define HAI_HW_TARGET __attribute__((target("popcnt")))
#define HAI_HAS_HW_KERNEL 1
#else
#define HAI_HW_TARGET
#define HAI_HAS_HW_KERNEL 0
#endif

struct HardwareOps {
  HAI_HW_TARGET static std::size_t count(const std::uint64_t* w, std::size_t n) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += static_cast<std::size_t>(__builtin_popcountll(w[i]));
    return c;
  }
  HAI_HW_TARGET static std::size_t count_and(const std::uint64_t* a, const std::uint64_t* b,
                                             std::size_t n) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += static_cast<std::size_t>(__builtin_popcountll(a[i] & b[i]));
    return c;
  }
  HAI_HW_TARGET static std::size_t count_xor(const std::uint64_t* a, const std::uint64_t* b,
                                             std::size_t n) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += static_cast<std::size_t>(__builtin_popcountll(a[i] ^ b[i]));
    return c;
  }
};

bool detect_hardware_popcount() noexcept {
#if HAI_HAS_HW_KERNEL
  __builtin_cpu_init();
  return __builtin_cpu_supports("popcnt");
#else
  return false;
#endif
}

const bool kHardwarePopcount = detect_hardware_popcount();

void require_same_length(const BitVector& a, const BitVector& b, const char* op) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(op) + ": length mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  }
}

PopcountPath effective(PopcountPath p) {
  return (p == PopcountPath::Hardware && kHardwarePopcount) ? PopcountPath::Hardware
                                                             : PopcountPath::Scalar;
}

}  // namespace

BitVector::BitVector(std::size_t length) : length_(length), words_(words_for(length), 0) {}

BitVector BitVector::ones(std::size_t length) {
  BitVector v(length);
  std::fill(v.words_.begin(), v.words_.end(), ~std::uint64_t{0});
  v.canonicalize();
  return v;
}

BitVector BitVector::from_bytes(std::span<const std::uint8_t> bytes, std::size_t bit_length) {
  if (bit_length > bytes.size() * 8) {
    throw std::invalid_argument("from_bytes: declared length " + std::to_string(bit_length) +
                                " exceeds byte capacity " + std::to_string(bytes.size() * 8));
  }
  BitVector v(bit_length);
  const std::size_t nbytes = (bit_length + 7) / 8;
  for (std::size_t b = 0; b < nbytes; ++b) {
    v.words_[b / 8] |= std::uint64_t{kReverse[bytes[b]]} << (8 * (b % 8));
  }
  v.canonicalize();
  return v;
}

std::vector<std::uint8_t> BitVector::to_bytes() const {
  std::vector<std::uint8_t> out(byte_size());
  write_bytes(out);
  return out;
}

void BitVector::write_bytes(std::span<std::uint8_t> out) const {
  const std::size_t nbytes = byte_size();
  if (out.size() < nbytes) throw std::invalid_argument("write_bytes: output buffer too small");
  for (std::size_t b = 0; b < nbytes; ++b) {
    const auto raw = static_cast<std::uint8_t>(words_[b / 8] >> (8 * (b % 8)));
    out[b] = kReverse[raw];
  }
}

bool BitVector::test(std::size_t i) const {
  if (i >= length_) throw std::out_of_range("BitVector::test: index out of range");
  return (words_[i / 64] >> (i % 64)) & 1U;
}

void BitVector::set(std::size_t i, bool value) {
  if (i >= length_) throw std::out_of_range("BitVector::set: index out of range");
  const std::uint64_t m = std::uint64_t{1} << (i % 64);
  if (value) {
    words_[i / 64] |= m;
  } else {
    words_[i / 64] &= ~m;
  }
}

void BitVector::flip(std::size_t i) {
  if (i >= length_) throw std::out_of_range("BitVector::flip: index out of range");
  words_[i / 64] ^= std::uint64_t{1} << (i % 64);
}

void BitVector::canonicalize() noexcept {
  if (!words_.empty()) words_.back() &= tail_mask(length_);
}

bool BitVector::is_canonical() const noexcept {
  if (words_.size() != words_for(length_)) return false;
  return words_.empty() || (words_.back() & ~tail_mask(length_)) == 0;
}

BitVector& BitVector::operator&=(const BitVector& other) {
  require_same_length(*this, other, "and");
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= other.words_[i];
  return *this;
}

BitVector& BitVector::operator|=(const BitVector& other) {
  require_same_length(*this, other, "or");
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
  return *this;
}

BitVector& BitVector::operator^=(const BitVector& other) {
  require_same_length(*this, other, "xor");
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= other.words_[i];
  return *this;
}

BitVector BitVector::operator~() const {
  BitVector r = *this;
  for (auto& w : r.words_) w = ~w;
  r.canonicalize();
  return r;
}

BitVector operator&(BitVector a, const BitVector& b) { return a &= b; }
BitVector operator|(BitVector a, const BitVector& b) { return a |= b; }
BitVector operator^(BitVector a, const BitVector& b) { return a ^= b; }

bool hardware_popcount_available() noexcept { return kHardwarePopcount; }

PopcountPath default_popcount_path() noexcept {
  return kHardwarePopcount ? PopcountPath::Hardware : PopcountPath::Scalar;
}

std::size_t popcount(const BitVector& v) { return popcount(v, default_popcount_path()); }

std::size_t popcount(const BitVector& v, PopcountPath path) {
  const auto w = v.words();
  return effective(path) == PopcountPath::Hardware ? HardwareOps::count(w.data(), w.size())
                                                   : ScalarOps::count(w.data(), w.size());
}

std::size_t and_similarity(const BitVector& a, const BitVector& b) {
  return and_similarity(a, b, default_popcount_path());
}

std::size_t and_similarity(const BitVector& a, const BitVector& b, PopcountPath path) {
  require_same_length(a, b, "and_similarity");
  const auto wa = a.words();
  const auto wb = b.words();
  return effective(path) == PopcountPath::Hardware
             ? HardwareOps::count_and(wa.data(), wb.data(), wa.size())
             : ScalarOps::count_and(wa.data(), wb.data(), wa.size());
}

std::size_t hamming(const BitVector& a, const BitVector& b) {
  return hamming(a, b, default_popcount_path());
}

std::size_t hamming(const BitVector& a, const BitVector& b, PopcountPath path) {
  require_same_length(a, b, "hamming");
  const auto wa = a.words();
  const auto wb = b.words();
  return effective(path) == PopcountPath::Hardware
             ? HardwareOps::count_xor(wa.data(), wb.data(), wa.size())
             : ScalarOps::count_xor(wa.data(), wb.data(), wa.size());
}

ModeAccumulator::ModeAccumulator(std::size_t length) : counts_(length, 0) {}

void ModeAccumulator::add(const BitVector& row) {
  if (row.size() != counts_.size()) {
    throw std::invalid_argument("ModeAccumulator::add: length mismatch");
  }
  const auto words = row.words();
  for (std::size_t wi = 0; wi < words.size(); ++wi) {
    std::uint64_t w = words[wi];
    std::uint32_t* base = counts_.data() + wi * 64;
    while (w != 0) {
      base[std::countr_zero(w)] += 1;
      w &= w - 1;
    }
  }
  ++rows_;
}

void ModeAccumulator::merge(const ModeAccumulator& other) {
  if (other.counts_.size() != counts_.size()) {
    throw std::invalid_argument("ModeAccumulator::merge: length mismatch");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  rows_ += other.rows_;
}

void ModeAccumulator::clear() noexcept {
  std::fill(counts_.begin(), counts_.end(), 0U);
  rows_ = 0;
}

BitVector ModeAccumulator::mode(TieBreak tie) const {
  if (rows_ == 0) throw std::logic_error("ModeAccumulator::mode: no rows");
  BitVector out(counts_.size());
  auto words = out.mutable_words();
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    const std::uint64_t twice = 2 * std::uint64_t{counts_[i]};
    const bool bit = twice > rows_ || (twice == rows_ && tie == TieBreak::One);
    if (bit) words[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  return out;
}

BitVector majority_mode(std::span<const BitVector> rows, TieBreak tie) {
  if (rows.empty()) throw std::invalid_argument("majority_mode: empty row set");
  ModeAccumulator acc(rows.front().size());
  for (const auto& r : rows) acc.add(r);
  return acc.mode(tie);
}

}  // namespace hai
