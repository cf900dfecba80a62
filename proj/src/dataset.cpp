#include "hai/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "hai/errors.hpp"
#include "hai/parallel.hpp"

namespace hai {
namespace {

constexpr std::uint16_t kHai1Version = 1;
constexpr std::size_t kRecordHeader = 4 + 2;

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw FormatError(std::string("HAI1: truncated while reading ") + what);
    }
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char* what) { return take(1, what)[0]; }
  std::uint16_t u16(const char* what) {
    auto b = take(2, what);
    return static_cast<std::uint16_t>(b[0] << 8 | b[1]);
  }
  std::uint32_t u32(const char* what) {
    auto b = take(4, what);
    return std::uint32_t{b[0]} << 24 | std::uint32_t{b[1]} << 16 | std::uint32_t{b[2]} << 8 | b[3];
  }
  [[nodiscard]] std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t expected_record_len(const DatasetMeta& m) {
  const std::uint32_t n = m.payload_elements();
  return m.payload_kind() == PayloadKind::Bits ? (n + 7) / 8 : n;
}

void validate_meta(const DatasetMeta& m) {
  if (static_cast<unsigned>(m.scheme) > 3) throw FormatError("unknown container scheme");
  if (!m.is_protected()) {
    if (m.n_out != 0) throw FormatError("plaintext dataset must have n_out = 0");
    if (m.delta != "0") throw FormatError("plaintext dataset must have delta \"0\"");
  } else {
    try {
      const auto rate = CompressionRate::parse(m.delta);
      if (rate.text() != m.delta) throw FormatError("delta '" + m.delta + "' is not in canonical form");
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("invalid delta: ") + e.what());
    }
    if (m.n_out == 0 || m.n_out > m.n_in) throw FormatError("protected dataset n_out out of range");
  }
  if (m.payload_elements() == 0) throw FormatError("dataset payload length is zero");
  if (m.record_len != expected_record_len(m)) {
    throw FormatError("record length " + std::to_string(m.record_len) + " inconsistent with " +
                      std::to_string(m.payload_elements()) + " payload elements");
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

PayloadKind DatasetMeta::payload_kind() const noexcept {
  return (scheme == ContainerScheme::PlainBits || scheme == ContainerScheme::BinarySample) ? PayloadKind::Bits
                                                                                          : PayloadKind::U8Vector;
}

bool DatasetMeta::is_protected() const noexcept {
  return scheme == ContainerScheme::BinarySample || scheme == ContainerScheme::RealProjection;
}

std::uint32_t DatasetMeta::payload_elements() const noexcept { return is_protected() ? n_out : n_in; }

DatasetMeta IndexedDataset::plain_bits_meta(std::uint32_t n_bits) {
  DatasetMeta m;
  m.scheme = ContainerScheme::PlainBits;
  m.n_in = n_bits;
  m.record_len = (n_bits + 7) / 8;
  return m;
}

DatasetMeta IndexedDataset::plain_u8_meta(std::uint32_t n_elements) {
  DatasetMeta m;
  m.scheme = ContainerScheme::PlainU8;
  m.n_in = n_elements;
  m.record_len = n_elements;
  return m;
}

void IndexedDataset::validate() const {
  validate_meta(meta);
  std::vector<std::uint32_t> idx;
  idx.reserve(records.size());
  const std::uint32_t elems = meta.payload_elements();
  const bool bits = meta.payload_kind() == PayloadKind::Bits;
  const std::uint8_t pad_mask = bits && elems % 8 != 0 ? static_cast<std::uint8_t>(0xFFU >> (elems % 8)) : 0;
  for (const auto& r : records) {
    if (r.payload.size() != meta.record_len) {
      throw FormatError("record " + std::to_string(r.index) + " payload has " + std::to_string(r.payload.size()) +
                        " bytes, expected " + std::to_string(meta.record_len));
    }
    if (r.label && *r.label == kNoLabel) throw FormatError("label 0xFFFF is reserved for 'absent'");
    if (pad_mask != 0 && (r.payload.back() & pad_mask) != 0) {
      throw FormatError("record " + std::to_string(r.index) + " has non-zero pad bits");
    }
    idx.push_back(r.index);
  }
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) throw FormatError("duplicate record index");
}

bool IndexedDataset::has_labels() const noexcept {
  return std::any_of(records.begin(), records.end(), [](const Record& r) { return r.label.has_value(); });
}

std::vector<std::uint32_t> IndexedDataset::indexes() const {
  std::vector<std::uint32_t> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.index);
  return out;
}

std::vector<std::uint32_t> IndexedDataset::labels() const {
  std::vector<std::uint32_t> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.label) throw std::invalid_argument("record " + std::to_string(r.index) + " has no label");
    out.push_back(*r.label);
  }
  return out;
}

BitVector IndexedDataset::bits(std::size_t i) const {
  if (meta.payload_kind() != PayloadKind::Bits) throw std::invalid_argument("dataset payloads are not bit vectors");
  return BitVector::from_bytes(records.at(i).payload, meta.payload_elements());
}

std::vector<BitVector> IndexedDataset::bit_rows() const {
  std::vector<BitVector> rows;
  rows.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) rows.push_back(bits(i));
  return rows;
}

std::optional<std::size_t> IndexedDataset::find(std::uint32_t index) const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].index == index) return i;
  }
  return std::nullopt;
}

std::vector<std::uint8_t> serialize_hai1(const IndexedDataset& dataset, const Hai1WriteOptions& opts) {
  dataset.validate();
  const bool labels = !opts.strip_labels && dataset.has_labels();
  const auto& m = dataset.meta;
  std::vector<std::uint8_t> out;
  out.reserve(32 + m.delta.size() + dataset.size() * (kRecordHeader + m.record_len));
  Writer w(out);
  for (const char c : std::string_view("HAI1")) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kHai1Version);
  w.u8(static_cast<std::uint8_t>(m.scheme));
  w.u8(labels ? 1 : 0);
  w.u16(static_cast<std::uint16_t>(m.delta.size()));
  w.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(m.delta.data()), m.delta.size()));
  w.u32(m.n_in);
  w.u32(m.n_out);
  w.u32(m.record_len);
  w.u32(static_cast<std::uint32_t>(dataset.size()));
  for (const auto& r : dataset.records) {
    w.u32(r.index);
    w.u16(labels && r.label ? *r.label : kNoLabel);
    w.bytes(r.payload);
  }
  return out;
}

IndexedDataset parse_hai1(std::span<const std::uint8_t> bytes) {
  Reader rd(bytes);
  const auto magic = rd.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), "HAI1")) throw FormatError("HAI1: bad magic");
  const auto version = rd.u16("version");
  if (version != kHai1Version) throw FormatError("HAI1: unsupported version " + std::to_string(version));
  const auto scheme = rd.u8("scheme");
  if (scheme > 3) throw FormatError("HAI1: unknown scheme " + std::to_string(scheme));
  const auto flags = rd.u8("flags");
  if ((flags & ~1U) != 0) throw FormatError("HAI1: unknown flag bits");
  const auto delta_len = rd.u16("delta length");
  const auto delta = rd.take(delta_len, "delta");

  IndexedDataset ds;
  ds.meta.scheme = static_cast<ContainerScheme>(scheme);
  ds.meta.delta.assign(delta.begin(), delta.end());
  ds.meta.n_in = rd.u32("n_in");
  ds.meta.n_out = rd.u32("n_out");
  ds.meta.record_len = rd.u32("record length");
  const auto count = rd.u32("count");
  validate_meta(ds.meta);

  const std::uint64_t need = std::uint64_t{count} * (kRecordHeader + ds.meta.record_len);
  if (rd.remaining() < need) throw FormatError("HAI1: truncated record section");
  if (rd.remaining() > need) throw FormatError("HAI1: trailing bytes after last record");

  const bool labels = flags & 1U;
  ds.records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Record r;
    r.index = rd.u32("record index");
    const auto label = rd.u16("record label");
    if (label != kNoLabel) {
      if (!labels) throw FormatError("HAI1: label present but labels flag is clear");
      r.label = label;
    }
    const auto payload = rd.take(ds.meta.record_len, "payload");
    r.payload.assign(payload.begin(), payload.end());
    ds.records.push_back(std::move(r));
  }
  ds.validate();
  return ds;
}

void write_hai1(const IndexedDataset& dataset, const std::filesystem::path& path, const Hai1WriteOptions& opts) {
  write_file(path, serialize_hai1(dataset, opts));
}

IndexedDataset read_hai1(const std::filesystem::path& path) { return parse_hai1(read_file(path)); }

std::vector<std::filesystem::path> export_record_files(const IndexedDataset& dataset, const std::filesystem::path& dir,
                                                       const std::string& prefix) {
  std::filesystem::create_directories(dir);
  std::uint32_t max_index = 0;
  for (const auto& r : dataset.records) max_index = std::max(max_index, r.index);
  const std::size_t width = std::max<std::size_t>(3, std::to_string(max_index).size());
  std::vector<std::filesystem::path> paths;
  for (const auto& r : dataset.records) {
    std::string id = std::to_string(r.index);
    id.insert(0, width - id.size(), '0');
    std::string name = prefix + "-" + id;
    if (r.label) name += "-" + std::to_string(*r.label);
    paths.push_back(dir / name);
    write_file(paths.back(), r.payload);
  }
  return paths;
}

IndexedDataset import_record_files(const std::filesystem::path& dir, const std::string& prefix,
                                   const DatasetMeta& meta) {
  IndexedDataset ds;
  ds.meta = meta;
  const std::string head = prefix + "-";
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind(head, 0) != 0) continue;
    const std::string rest = name.substr(head.size());
    const auto dash = rest.find('-');
    const std::string id = rest.substr(0, dash);
    auto numeric = [](const std::string& s) {
      return !s.empty() && s.size() <= 9 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (!numeric(id)) throw FormatError("unrecognised record file name " + name);
    Record r;
    r.index = static_cast<std::uint32_t>(std::stoul(id));
    if (dash != std::string::npos) {
      const std::string label = rest.substr(dash + 1);
      if (!numeric(label) || std::stoul(label) >= kNoLabel) throw FormatError("bad label in file name " + name);
      r.label = static_cast<std::uint16_t>(std::stoul(label));
    }
    r.payload = read_file(entry.path());
    ds.records.push_back(std::move(r));
  }
  std::sort(ds.records.begin(), ds.records.end(), [](const Record& a, const Record& b) { return a.index < b.index; });
  ds.validate();
  return ds;
}

IndexTransposition derive_transposition(const SecretKey& key, const IndexedDataset& plain, bool permute_classes) {
  std::map<std::int64_t, std::vector<std::uint32_t>> by_class;
  for (const auto& r : plain.records) by_class[r.label ? std::int64_t{*r.label} : -1].push_back(r.index);
  std::vector<ClassPermutation> classes;
  for (auto& [cls, idx] : by_class) {
    std::sort(idx.begin(), idx.end());
    const auto count = static_cast<std::uint32_t>(idx.size());
    IndexPermutation perm = [&] {
      if (permute_classes) return derive_permutation(key, cls, count);
      std::vector<std::uint32_t> ident(count);
      for (std::uint32_t i = 0; i < count; ++i) ident[i] = i;
      return IndexPermutation(cls, std::move(ident));
    }();
    classes.push_back({std::move(perm), std::move(idx)});
  }
  return IndexTransposition(std::move(classes));
}

IndexedDataset protect_dataset(const IndexedDataset& dataset, const Sketcher& sketcher, bool permute_classes,
                               const SecretKey& key, unsigned threads) {
  const auto& params = sketcher.params();
  const auto& m = dataset.meta;
  const bool bits_ok = m.scheme == ContainerScheme::PlainBits && params.scheme == Scheme::BinarySample;
  const bool real_ok = m.scheme == ContainerScheme::PlainU8 && params.scheme == Scheme::RealProjection;
  if (!bits_ok && !real_ok) {
    throw std::invalid_argument("scheme " + std::string(scheme_name(params.scheme)) +
                                " does not match the dataset payload kind");
  }
  if (m.n_in != params.n_in) {
    throw std::invalid_argument("dataset has " + std::to_string(m.n_in) + " input elements, sketcher expects " +
                                std::to_string(params.n_in));
  }

  const auto transposition = derive_transposition(key, dataset, permute_classes);

  IndexedDataset out;
  out.meta.scheme = bits_ok ? ContainerScheme::BinarySample : ContainerScheme::RealProjection;
  out.meta.n_in = params.n_in;
  out.meta.n_out = params.n_out;
  out.meta.delta = params.delta.text();
  out.meta.record_len = static_cast<std::uint32_t>(params.output_bytes());
  if (real_ok) {
    const auto side = static_cast<std::uint32_t>(std::lround(std::sqrt(static_cast<double>(params.n_out))));
    if (side * side == params.n_out) {
      out.meta.item_shape = {side, side};
    } else {
      out.meta.item_shape = {1, params.n_out};
    }
  }
  out.records.resize(dataset.size());
  parallel_for(dataset.size(), std::max(1U, threads), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& src = dataset.records[i];
      auto& dst = out.records[i];
      dst.index = *transposition.to_protected(src.index);
      dst.label = src.label;
      dst.payload = sketcher.sketch_payload(src.payload);
    }
  });
  std::sort(out.records.begin(), out.records.end(), [](const Record& a, const Record& b) { return a.index < b.index; });
  return out;
}

}  // namespace hai
