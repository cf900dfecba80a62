#include "hai/keyed_stream.hpp"

#include <sodium.h>
#include <sys/stat.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hai/errors.hpp"
#include "hai/random.hpp"

namespace hai {
namespace {

constexpr char kPersonal[crypto_generichash_blake2b_PERSONALBYTES + 1] = "hai.keyed-stream";
static_assert(sizeof(kPersonal) - 1 == crypto_generichash_blake2b_PERSONALBYTES);

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

void check_tag(std::span<const std::uint8_t> tag) {
  if (tag.empty()) throw std::invalid_argument("domain tag must be non-empty");
  if (tag.size() > kMaxDomainTag) {
    throw std::invalid_argument("domain tag exceeds " + std::to_string(kMaxDomainTag) + " bytes");
  }
}

std::array<std::uint8_t, 32> make_subkey(const SecretKey& key, std::span<const std::uint8_t> tag) {
  ensure_sodium();
  check_tag(tag);
  std::array<std::uint8_t, 1 + kMaxDomainTag> msg{};
  msg[0] = static_cast<std::uint8_t>(tag.size());
  std::copy(tag.begin(), tag.end(), msg.begin() + 1);
  std::array<std::uint8_t, 32> subkey{};
  crypto_generichash_blake2b_salt_personal(subkey.data(), subkey.size(), msg.data(), 1 + tag.size(),
                                           key.bytes().data(), key.bytes().size(), nullptr,
                                           reinterpret_cast<const unsigned char*>(kPersonal));
  return subkey;
}

std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  // Two rounds of splitmix64 over (master, index).
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(master) ^ index);
}

SecretKey::SecretKey(const std::array<std::uint8_t, kBytes>& bytes) : bytes_(bytes) {
  if (std::all_of(bytes_.begin(), bytes_.end(), [](std::uint8_t b) { return b == 0; })) {
    throw std::invalid_argument("all-zero secret key rejected");
  }
}

SecretKey SecretKey::generate() {
  ensure_sodium();
  std::array<std::uint8_t, kBytes> b{};
  do {
    randombytes_buf(b.data(), b.size());
  } while (std::all_of(b.begin(), b.end(), [](std::uint8_t x) { return x == 0; }));
  return SecretKey(b);
}

SecretKey SecretKey::from_seed(std::uint64_t seed) {
  ensure_sodium();
  std::array<std::uint8_t, 8> in{};
  for (int i = 0; i < 8; ++i) in[i] = static_cast<std::uint8_t>(seed >> (56 - 8 * i));
  std::array<std::uint8_t, kBytes> b{};
  crypto_generichash_blake2b(b.data(), b.size(), in.data(), in.size(), nullptr, 0);
  return SecretKey(b);
}

SecretKey SecretKey::from_hex(std::string_view hex) {
  if (hex.size() != 2 * kBytes) {
    throw FormatError("key must be exactly 64 hex digits, got " + std::to_string(hex.size()));
  }
  std::array<std::uint8_t, kBytes> b{};
  for (std::size_t i = 0; i < kBytes; ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw FormatError("key contains a non-hex character");
    b[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  try {
    return SecretKey(b);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

std::string SecretKey::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(2 * kBytes);
  for (auto b : bytes_) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xF]);
  }
  return s;
}

SecretKey SecretKey::with_bit_flipped(std::size_t bit) const {
  if (bit >= 8 * kBytes) throw std::out_of_range("key bit index out of range");
  auto b = bytes_;
  b[bit / 8] ^= static_cast<std::uint8_t>(0x80U >> (bit % 8));
  return SecretKey(b);
}

DomainTag::DomainTag(std::string_view prefix) : bytes_(prefix.begin(), prefix.end()) {
  if (bytes_.size() > kMaxDomainTag) throw std::invalid_argument("domain tag prefix too long");
}

DomainTag& DomainTag::add_u32(std::uint32_t v) {
  for (int i = 3; i >= 0; --i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  if (bytes_.size() > kMaxDomainTag) throw std::invalid_argument("domain tag exceeds 16 bytes");
  return *this;
}

DomainTag& DomainTag::add_u64(std::uint64_t v) {
  for (int i = 7; i >= 0; --i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  if (bytes_.size() > kMaxDomainTag) throw std::invalid_argument("domain tag exceeds 16 bytes");
  return *this;
}

std::vector<std::uint8_t> derive_stream(const SecretKey& key, std::span<const std::uint8_t> domain_tag,
                                        std::size_t length) {
  if (length == 0) throw std::invalid_argument("derive_stream: zero length");
  auto subkey = make_subkey(key, domain_tag);
  std::vector<std::uint8_t> out(length);
  const std::array<std::uint8_t, crypto_stream_chacha20_ietf_NONCEBYTES> nonce{};
  crypto_stream_chacha20_ietf(out.data(), out.size(), nonce.data(), subkey.data());
  sodium_memzero(subkey.data(), subkey.size());
  return out;
}

std::vector<std::uint8_t> derive_stream(const SecretKey& key, std::string_view domain_tag,
                                        std::size_t length) {
  return derive_stream(key, as_bytes(domain_tag), length);
}

KeyedRng::KeyedRng(const SecretKey& key, std::span<const std::uint8_t> domain_tag)
    : subkey_(make_subkey(key, domain_tag)) {}

KeyedRng::KeyedRng(const SecretKey& key, std::string_view domain_tag)
    : KeyedRng(key, as_bytes(domain_tag)) {}

void KeyedRng::refill() {
  constexpr std::size_t kBlock = 64;
  const std::array<std::uint8_t, crypto_stream_chacha20_ietf_NONCEBYTES> nonce{};
  std::fill(buffer_.begin(), buffer_.end(), 0);
  crypto_stream_chacha20_ietf_xor_ic(buffer_.data(), buffer_.data(), buffer_.size(), nonce.data(),
                                     next_block_, subkey_.data());
  next_block_ += static_cast<std::uint32_t>(buffer_.size() / kBlock);
  pos_ = 0;
}

KeyedRng::result_type KeyedRng::operator()() {
  if (pos_ + 8 > buffer_.size()) refill();
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buffer_[pos_ + static_cast<std::size_t>(i)];
  pos_ += 8;
  return v;
}

void KeyedRng::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    if (pos_ == buffer_.size()) refill();
    const std::size_t n = std::min(out.size() - done, buffer_.size() - pos_);
    std::memcpy(out.data() + done, buffer_.data() + pos_, n);
    pos_ += n;
    done += n;
  }
}

void write_key_file(const std::filesystem::path& path, const SecretKey& key, bool force) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::exists(path, ec)) {
    if (!force) throw IoError("refusing to overwrite existing key file " + path.string());
    fs::remove(path, ec);
    if (ec) throw IoError("cannot remove " + path.string() + ": " + ec.message());
  }
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << key.to_hex() << '\n';
    if (!out) throw IoError("short write to " + path.string());
  }
  fs::permissions(path, fs::perms::owner_read, fs::perm_options::replace, ec);
  if (ec) throw IoError("cannot set permissions on " + path.string() + ": " + ec.message());
}

LoadedKey read_key_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open key file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  if (text.size() != 65 || text.back() != '\n') {
    throw FormatError("key file must contain 64 hex digits followed by a newline");
  }
  text.pop_back();
  LoadedKey loaded{SecretKey::from_hex(text), {}};
  struct stat st {};
  if (::stat(path.c_str(), &st) == 0) {
    const auto mode = st.st_mode & 0777;
    if (mode != 0400) {
      std::ostringstream w;
      w << "key file " << path.string() << " has mode 0" << std::oct << mode
        << "; expected owner-read-only (0400)";
      loaded.warnings.push_back(w.str());
    }
  }
  return loaded;
}

}  // namespace hai
