#pragma once

// Secret keys and the keyed pseudo-random stream every derivation draws from.
//
// Construction: subkey = BLAKE2b-256(key = K, msg = len(tag) || tag,
// personal = "hai.keyed-stream"), then the stream is the ChaCha20 (IETF,
// all-zero nonce) keystream under that subkey. Both primitives come from
// libsodium.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hai {

class SecretKey {
 public:
  static constexpr std::size_t kBytes = 32;

  // Throws std::invalid_argument for an all-zero key.
  explicit SecretKey(const std::array<std::uint8_t, kBytes>& bytes);

  // Fresh key from OS entropy.
  static SecretKey generate();
  // Deterministic key for experiments and tests; never use for real data.
  static SecretKey from_seed(std::uint64_t seed);
  // Exactly 64 hex digits (case-insensitive).
  static SecretKey from_hex(std::string_view hex);

  [[nodiscard]] std::string to_hex() const;
  [[nodiscard]] const std::array<std::uint8_t, kBytes>& bytes() const noexcept { return bytes_; }

  // Copy with bit `bit` (0 = MSB of byte 0) flipped; used by avalanche checks.
  [[nodiscard]] SecretKey with_bit_flipped(std::size_t bit) const;

  friend bool operator==(const SecretKey&, const SecretKey&) = default;

 private:
  std::array<std::uint8_t, kBytes> bytes_;
};

inline constexpr std::size_t kMaxDomainTag = 16;

// Domain tags are at most 16 bytes. Tags that carry integers encode them
// big-endian after an ASCII prefix.
class DomainTag {
 public:
  explicit DomainTag(std::string_view prefix);
  DomainTag& add_u32(std::uint32_t v);
  DomainTag& add_u64(std::uint64_t v);
  [[nodiscard]] std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

// Throws std::invalid_argument for length 0, an empty tag or a tag over 16 bytes.
[[nodiscard]] std::vector<std::uint8_t> derive_stream(const SecretKey& key,
                                                      std::span<const std::uint8_t> domain_tag,
                                                      std::size_t length);
[[nodiscard]] std::vector<std::uint8_t> derive_stream(const SecretKey& key, std::string_view domain_tag,
                                                      std::size_t length);

// Unbounded view of the same keystream as a 64-bit generator. The first
// 8*n bytes consumed equal derive_stream(key, tag, 8*n), read little-endian.
class KeyedRng {
 public:
  using result_type = std::uint64_t;

  KeyedRng(const SecretKey& key, std::span<const std::uint8_t> domain_tag);
  KeyedRng(const SecretKey& key, const DomainTag& tag) : KeyedRng(key, tag.bytes()) {}
  KeyedRng(const SecretKey& key, std::string_view domain_tag);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

  void fill(std::span<std::uint8_t> out);

 private:
  void refill();

  std::array<std::uint8_t, 32> subkey_{};
  std::array<std::uint8_t, 4096> buffer_{};
  std::size_t pos_ = 4096;
  std::uint32_t next_block_ = 0;
};

// Key file: 64 hex digits and a newline.
void write_key_file(const std::filesystem::path& path, const SecretKey& key, bool force);

struct LoadedKey {
  SecretKey key;
  std::vector<std::string> warnings;
};

// Warns (does not fail) when the file is readable or writable by anyone but
// the owner, or writable by the owner.
[[nodiscard]] LoadedKey read_key_file(const std::filesystem::path& path);

}  // namespace hai
