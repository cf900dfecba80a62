#include <fstream>
#include <numeric>
#include <string>

#include "hai/dataset.hpp"
#include "hai/errors.hpp"

namespace hai {
namespace {

constexpr std::uint8_t kIdxTypeU8 = 0x08;

struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::span<const std::uint8_t> data;
};

IdxTensor parse_tensor(std::span<const std::uint8_t> bytes, const char* what) {
  const std::string w(what);
  if (bytes.size() < 4) throw FormatError("IDX " + w + ": truncated header");
  if (bytes[0] != 0 || bytes[1] != 0) throw FormatError("IDX " + w + ": bad magic");
  if (bytes[2] != kIdxTypeU8) throw FormatError("IDX " + w + ": only unsigned byte tensors are supported");
  const std::size_t ndims = bytes[3];
  if (ndims == 0) throw FormatError("IDX " + w + ": zero dimensions");
  if (bytes.size() < 4 + 4 * ndims) throw FormatError("IDX " + w + ": truncated dimension list");
  IdxTensor t;
  std::uint64_t total = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    const auto* p = bytes.data() + 4 + 4 * d;
    const std::uint32_t v = std::uint32_t{p[0]} << 24 | std::uint32_t{p[1]} << 16 | std::uint32_t{p[2]} << 8 | p[3];
    t.dims.push_back(v);
    total *= v;
    if (total > (std::uint64_t{1} << 40)) throw FormatError("IDX " + w + ": tensor too large");
  }
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() - header < total) throw FormatError("IDX " + w + ": truncated data");
  if (bytes.size() - header > total) throw FormatError("IDX " + w + ": trailing bytes");
  t.data = bytes.subspan(header, total);
  return t;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

IndexedDataset parse_idx(std::span<const std::uint8_t> images, std::optional<std::span<const std::uint8_t>> labels) {
  const auto img = parse_tensor(images, "images");
  if (img.dims.size() < 2) throw FormatError("IDX images: expected at least two dimensions");
  const std::uint32_t count = img.dims[0];
  std::uint64_t item = 1;
  for (std::size_t d = 1; d < img.dims.size(); ++d) item *= img.dims[d];
  if (item == 0 || item > 0xFFFFFFFFULL) throw FormatError("IDX images: bad item size");

  IndexedDataset ds;
  ds.meta = IndexedDataset::plain_u8_meta(static_cast<std::uint32_t>(item));
  ds.meta.item_shape.assign(img.dims.begin() + 1, img.dims.end());

  std::span<const std::uint8_t> label_data;
  if (labels) {
    const auto lab = parse_tensor(*labels, "labels");
    if (lab.dims.size() != 1) throw FormatError("IDX labels: expected one dimension");
    if (lab.dims[0] != count) {
      throw FormatError("IDX: " + std::to_string(count) + " images but " + std::to_string(lab.dims[0]) + " labels");
    }
    label_data = lab.data;
  }
  ds.records.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto& r = ds.records[i];
    r.index = i;
    const auto px = img.data.subspan(std::size_t{i} * item, item);
    r.payload.assign(px.begin(), px.end());
    if (labels) r.label = label_data[i];
  }
  return ds;
}

std::vector<std::uint8_t> serialize_idx_images(const IndexedDataset& dataset) {
  if (dataset.meta.payload_kind() != PayloadKind::U8Vector) {
    throw std::invalid_argument("IDX export needs u8 payloads");
  }
  std::vector<std::uint32_t> shape = dataset.meta.item_shape;
  const std::uint32_t elems = dataset.meta.payload_elements();
  if (shape.empty() || std::accumulate(shape.begin(), shape.end(), std::uint64_t{1}, std::multiplies<>()) != elems) {
    shape = {elems};
  }
  std::vector<std::uint8_t> out = {0, 0, kIdxTypeU8, static_cast<std::uint8_t>(1 + shape.size())};
  put_u32(out, static_cast<std::uint32_t>(dataset.size()));
  for (auto d : shape) put_u32(out, d);
  out.reserve(out.size() + dataset.size() * elems);
  for (const auto& r : dataset.records) out.insert(out.end(), r.payload.begin(), r.payload.end());
  return out;
}

std::vector<std::uint8_t> serialize_idx_labels(const IndexedDataset& dataset) {
  std::vector<std::uint8_t> out = {0, 0, kIdxTypeU8, 1};
  put_u32(out, static_cast<std::uint32_t>(dataset.size()));
  for (const auto& r : dataset.records) {
    if (!r.label) throw std::invalid_argument("IDX label export: record " + std::to_string(r.index) + " unlabeled");
    if (*r.label > 0xFF) throw std::invalid_argument("IDX label export: label exceeds 255");
    out.push_back(static_cast<std::uint8_t>(*r.label));
  }
  return out;
}

IndexedDataset read_idx(const std::filesystem::path& images, const std::optional<std::filesystem::path>& labels) {
  const auto img = slurp(images);
  if (!labels) return parse_idx(img);
  const auto lab = slurp(*labels);
  return parse_idx(img, std::span<const std::uint8_t>(lab));
}

void write_idx(const IndexedDataset& dataset, const std::filesystem::path& images,
               const std::optional<std::filesystem::path>& labels) {
  dump(images, serialize_idx_images(dataset));
  if (labels) dump(*labels, serialize_idx_labels(dataset));
}

}  // namespace hai
