#pragma once

// Packed bit vector used for plaintext feature records and binary sketches.
//
// Storage is little-endian within 64-bit words: logical bit i lives in
// words()[i / 64] at bit position i % 64. Bits past size() are always zero.
// The external byte form (to_bytes / from_bytes) is MSB-first: logical bit 0
// is the most significant bit of byte 0, which matches the import order of
// mpz_import(rop, count, 1, 1, 1, 0, data).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hai {

class BitVector {
 public:
  static constexpr std::size_t kWordBits = 64;

  BitVector() = default;
  explicit BitVector(std::size_t length);

  static BitVector ones(std::size_t length);

  // `bit_length` must not exceed 8 * bytes.size(); bits of the last byte past
  // `bit_length` are ignored.
  static BitVector from_bytes(std::span<const std::uint8_t> bytes, std::size_t bit_length);

  [[nodiscard]] std::vector<std::uint8_t> to_bytes() const;
  // Writes byte_size() bytes into `out`.
  void write_bytes(std::span<std::uint8_t> out) const;

  [[nodiscard]] std::size_t size() const noexcept { return length_; }
  [[nodiscard]] std::size_t byte_size() const noexcept { return (length_ + 7) / 8; }
  [[nodiscard]] std::size_t word_count() const noexcept { return words_.size(); }
  [[nodiscard]] bool empty() const noexcept { return length_ == 0; }

  [[nodiscard]] bool test(std::size_t i) const;
  void set(std::size_t i, bool value = true);
  void flip(std::size_t i);

  [[nodiscard]] std::span<const std::uint64_t> words() const noexcept { return words_; }
  // Raw word access. Callers that write past size() must call canonicalize().
  [[nodiscard]] std::span<std::uint64_t> mutable_words() noexcept { return words_; }

  // Clears pad bits past size().
  void canonicalize() noexcept;
  [[nodiscard]] bool is_canonical() const noexcept;

  BitVector& operator&=(const BitVector& other);
  BitVector& operator|=(const BitVector& other);
  BitVector& operator^=(const BitVector& other);
  [[nodiscard]] BitVector operator~() const;

  friend bool operator==(const BitVector&, const BitVector&) = default;

 private:
  std::size_t length_ = 0;
  std::vector<std::uint64_t> words_;
};

BitVector operator&(BitVector a, const BitVector& b);
BitVector operator|(BitVector a, const BitVector& b);
BitVector operator^(BitVector a, const BitVector& b);

enum class PopcountPath { Hardware, Scalar };

// Path selected at startup: Hardware when the CPU reports popcnt support.
[[nodiscard]] PopcountPath default_popcount_path() noexcept;
[[nodiscard]] bool hardware_popcount_available() noexcept;

[[nodiscard]] std::size_t popcount(const BitVector& v);
[[nodiscard]] std::size_t popcount(const BitVector& v, PopcountPath path);

// popcount(a AND b). Throws std::invalid_argument on length mismatch.
[[nodiscard]] std::size_t and_similarity(const BitVector& a, const BitVector& b);
[[nodiscard]] std::size_t and_similarity(const BitVector& a, const BitVector& b, PopcountPath path);

// popcount(a XOR b). Throws std::invalid_argument on length mismatch.
[[nodiscard]] std::size_t hamming(const BitVector& a, const BitVector& b);
[[nodiscard]] std::size_t hamming(const BitVector& a, const BitVector& b, PopcountPath path);

enum class TieBreak { Zero, One };

// Per-position set-bit counts over a multiset of equal-length rows. Counting
// is order independent, so partial accumulators may be merged in any order.
class ModeAccumulator {
 public:
  explicit ModeAccumulator(std::size_t length);

  void add(const BitVector& row);
  void merge(const ModeAccumulator& other);
  void clear() noexcept;

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t length() const noexcept { return counts_.size(); }
  [[nodiscard]] std::span<const std::uint32_t> counts() const noexcept { return counts_; }

  // Bit i set iff strictly more than half of the rows have bit i set; exact
  // halves resolved by `tie`. Throws std::logic_error when no rows were added.
  [[nodiscard]] BitVector mode(TieBreak tie = TieBreak::Zero) const;

 private:
  std::vector<std::uint32_t> counts_;
  std::size_t rows_ = 0;
};

// Throws std::invalid_argument for an empty set or mixed lengths.
[[nodiscard]] BitVector majority_mode(std::span<const BitVector> rows, TieBreak tie = TieBreak::Zero);

}  // namespace hai
