#pragma once

// Indexed datasets, the HAI1 container, IDX ingestion, synthetic generators
// and dataset protection.
//
// HAI1 layout (all integers big-endian):
//
//   "HAI1" | version u16 = 1 | scheme u8 | flags u8 (bit0: labels present)
//   | delta: u16 length + ASCII decimal | n_in u32 | n_out u32
//   | record_len_bytes u32 | count u32
//   | count x (index u32 | label u16, 0xFFFF when absent | payload)
//
// scheme: 0 plaintext bits, 1 plaintext u8, 2 binary-sample sketch,
// 3 real-projection sketch. Plaintext containers carry n_out = 0 and delta "0".

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hai/bitvector.hpp"
#include "hai/keyed_stream.hpp"
#include "hai/ml.hpp"
#include "hai/sketch.hpp"

namespace hai {

enum class PayloadKind : std::uint8_t { Bits, U8Vector };

enum class ContainerScheme : std::uint8_t { PlainBits = 0, PlainU8 = 1, BinarySample = 2, RealProjection = 3 };

inline constexpr std::uint16_t kNoLabel = 0xFFFF;

struct DatasetMeta {
  ContainerScheme scheme = ContainerScheme::PlainBits;
  std::uint32_t n_in = 0;
  std::uint32_t n_out = 0;
  std::string delta = "0";
  std::uint32_t record_len = 0;
  // Per-item tensor shape for IDX export (e.g. {28, 28}). Not stored in HAI1.
  std::vector<std::uint32_t> item_shape;

  [[nodiscard]] PayloadKind payload_kind() const noexcept;
  [[nodiscard]] bool is_protected() const noexcept;
  // Elements (bits or bytes) per payload: n_in for plaintext, n_out otherwise.
  [[nodiscard]] std::uint32_t payload_elements() const noexcept;
};

struct Record {
  std::uint32_t index = 0;
  std::optional<std::uint16_t> label;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const Record&, const Record&) = default;
};

struct IndexedDataset {
  DatasetMeta meta;
  std::vector<Record> records;

  static DatasetMeta plain_bits_meta(std::uint32_t n_bits);
  static DatasetMeta plain_u8_meta(std::uint32_t n_elements);

  // Throws FormatError on duplicate indexes, payload length mismatches,
  // label 0xFFFF, non-zero pad bits or inconsistent metadata.
  void validate() const;

  [[nodiscard]] std::size_t size() const noexcept { return records.size(); }
  [[nodiscard]] bool has_labels() const noexcept;
  [[nodiscard]] std::vector<std::uint32_t> indexes() const;
  // Throws std::invalid_argument when any record is unlabeled.
  [[nodiscard]] std::vector<std::uint32_t> labels() const;
  // Throws std::invalid_argument unless the payload kind is Bits.
  [[nodiscard]] std::vector<BitVector> bit_rows() const;
  [[nodiscard]] BitVector bits(std::size_t i) const;
  // Position of the record with this index (linear scan).
  [[nodiscard]] std::optional<std::size_t> find(std::uint32_t index) const;

  friend bool operator==(const IndexedDataset& a, const IndexedDataset& b) {
    return a.meta.scheme == b.meta.scheme && a.meta.n_in == b.meta.n_in && a.meta.n_out == b.meta.n_out &&
           a.meta.delta == b.meta.delta && a.meta.record_len == b.meta.record_len && a.records == b.records;
  }
};

struct Hai1WriteOptions {
  bool strip_labels = false;
};

[[nodiscard]] std::vector<std::uint8_t> serialize_hai1(const IndexedDataset& dataset, const Hai1WriteOptions& opts = {});
// Throws FormatError on any malformed input.
[[nodiscard]] IndexedDataset parse_hai1(std::span<const std::uint8_t> bytes);

void write_hai1(const IndexedDataset& dataset, const std::filesystem::path& path, const Hai1WriteOptions& opts = {});
[[nodiscard]] IndexedDataset read_hai1(const std::filesystem::path& path);

// IDX tensors: images are u8 tensors with two or more dimensions (magic
// 0x00000803 for the usual N x rows x cols), labels are u8 vectors (magic
// 0x00000801) merged by position.
[[nodiscard]] IndexedDataset parse_idx(std::span<const std::uint8_t> images,
                                       std::optional<std::span<const std::uint8_t>> labels = std::nullopt);
[[nodiscard]] std::vector<std::uint8_t> serialize_idx_images(const IndexedDataset& dataset);
[[nodiscard]] std::vector<std::uint8_t> serialize_idx_labels(const IndexedDataset& dataset);

[[nodiscard]] IndexedDataset read_idx(const std::filesystem::path& images,
                                      const std::optional<std::filesystem::path>& labels = std::nullopt);
void write_idx(const IndexedDataset& dataset, const std::filesystem::path& images,
               const std::optional<std::filesystem::path>& labels = std::nullopt);

// Per-record files named <prefix>-<index>-<label> (the training-xxx-k style).
// Index digits are zero-padded to at least three places.
std::vector<std::filesystem::path> export_record_files(const IndexedDataset& dataset, const std::filesystem::path& dir,
                                                       const std::string& prefix);
[[nodiscard]] IndexedDataset import_record_files(const std::filesystem::path& dir, const std::string& prefix,
                                                 const DatasetMeta& meta);

struct SynthConfig {
  std::uint64_t seed = 1;
  std::uint32_t n_train = 2000;
  std::uint32_t n_val = 200;
  std::uint32_t n_feat = 49955;
  std::uint32_t classes = 2;
  double p_base = 0.5;
  double p_flip = 0.1;
};

// Cyber-style binary records: one hidden Bernoulli(p_base) prototype per
// class, each record the prototype with independent Bernoulli(p_flip) flips.
// Labels are 1..classes, balanced round-robin by record index.
[[nodiscard]] std::pair<IndexedDataset, IndexedDataset> gen_synthetic_cyber(const SynthConfig& cfg);

struct ImageSynthConfig {
  std::uint64_t seed = 1;
  std::uint32_t n_train = 60000;
  std::uint32_t n_val = 10000;
  std::uint32_t classes = 10;
  std::uint32_t rows = 28;
  std::uint32_t cols = 28;
};

// Greyscale images with the Fashion-MNIST tensor shape: per-class shape
// prototypes, jittered by shift, contrast and pixel noise. Labels 0..classes-1.
[[nodiscard]] std::pair<IndexedDataset, IndexedDataset> gen_synthetic_images(const ImageSynthConfig& cfg);

// Owner-side index map: within each class (unlabeled records form one class,
// id -1) plaintext records in index order are permuted by derive_permutation
// when `permute_classes` is set, identity otherwise.
[[nodiscard]] IndexTransposition derive_transposition(const SecretKey& key, const IndexedDataset& plain,
                                                      bool permute_classes);

// Sketches every payload and, with `permute_classes`, republishes each record
// under its permuted index. Output records are sorted by index. Throws
// std::invalid_argument on scheme/payload mismatch.
[[nodiscard]] IndexedDataset protect_dataset(const IndexedDataset& dataset, const Sketcher& sketcher,
                                             bool permute_classes, const SecretKey& key, unsigned threads = 1);

}  // namespace hai
