#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hai/dataset.hpp"
#include "hai/random.hpp"

namespace hai {
namespace {

// P(bit) = threshold / 2^32.
std::uint64_t bernoulli_threshold(double p) {
  return static_cast<std::uint64_t>(std::floor(p * 4294967296.0));
}

// Each 64-bit draw supplies two 32-bit uniforms.
template <class Gen>
BitVector bernoulli_bits(Gen& gen, std::uint32_t n, std::uint64_t threshold) {
  BitVector v(n);
  auto words = v.mutable_words();
  for (std::uint32_t i = 0; i < n; i += 2) {
    const std::uint64_t r = gen();
    if ((r & 0xFFFFFFFFULL) < threshold) words[i / 64] |= std::uint64_t{1} << (i % 64);
    if (i + 1 < n && (r >> 32) < threshold) words[(i + 1) / 64] |= std::uint64_t{1} << ((i + 1) % 64);
  }
  return v;
}

enum Stream : std::uint64_t { kPrototype = 1, kTrain = 2, kVal = 3 };

IndexedDataset cyber_split(const SynthConfig& cfg, const std::vector<BitVector>& prototypes, std::uint32_t count,
                           Stream stream) {
  IndexedDataset ds;
  ds.meta = IndexedDataset::plain_bits_meta(cfg.n_feat);
  ds.records.resize(count);
  const auto flip = bernoulli_threshold(cfg.p_flip);
  const std::uint64_t base = derive_seed(cfg.seed, stream);
  for (std::uint32_t i = 0; i < count; ++i) {
    SeededRng rng(derive_seed(base, i));
    const std::uint32_t cls = i % cfg.classes;
    BitVector v = prototypes[cls];
    v ^= bernoulli_bits(rng, cfg.n_feat, flip);
    auto& r = ds.records[i];
    r.index = i;
    r.label = static_cast<std::uint16_t>(cls + 1);
    r.payload = v.to_bytes();
  }
  return ds;
}

}  // namespace

std::pair<IndexedDataset, IndexedDataset> gen_synthetic_cyber(const SynthConfig& cfg) {
  if (!(cfg.p_flip >= 0.0 && cfg.p_flip < 0.5)) {
    throw std::invalid_argument("p_flip must lie in [0, 0.5)");
  }
  if (!(cfg.p_base >= 0.0 && cfg.p_base <= 1.0)) throw std::invalid_argument("p_base must lie in [0, 1]");
  if (cfg.classes < 2 || cfg.classes >= 0xFFFF) throw std::invalid_argument("classes must be at least 2");
  if (cfg.n_feat == 0) throw std::invalid_argument("n_feat must be positive");

  std::vector<BitVector> prototypes;
  const auto base = bernoulli_threshold(cfg.p_base);
  for (std::uint32_t c = 0; c < cfg.classes; ++c) {
    SeededRng rng(derive_seed(derive_seed(cfg.seed, kPrototype), c));
    prototypes.push_back(bernoulli_bits(rng, cfg.n_feat, base));
  }
  return {cyber_split(cfg, prototypes, cfg.n_train, kTrain), cyber_split(cfg, prototypes, cfg.n_val, kVal)};
}

namespace {

struct Blob {
  double cy, cx, ry, rx, level;
};

// Class silhouettes: a few elliptic blobs with a quadratic falloff.
std::vector<double> render_prototype(const ImageSynthConfig& cfg, std::uint32_t cls) {
  SeededRng rng(derive_seed(derive_seed(cfg.seed, kPrototype), cls));
  const double h = cfg.rows;
  const double w = cfg.cols;
  const int blobs = 2 + static_cast<int>(uniform_below(rng, 4));
  std::vector<Blob> parts;
  for (int b = 0; b < blobs; ++b) {
    parts.push_back({h * (0.2 + 0.6 * uniform01(rng)), w * (0.2 + 0.6 * uniform01(rng)),
                     h * (0.08 + 0.25 * uniform01(rng)), w * (0.08 + 0.25 * uniform01(rng)),
                     120.0 + 135.0 * uniform01(rng)});
  }
  std::vector<double> img(std::size_t{cfg.rows} * cfg.cols, 0.0);
  for (std::uint32_t y = 0; y < cfg.rows; ++y) {
    for (std::uint32_t x = 0; x < cfg.cols; ++x) {
      double v = 0;
      for (const auto& p : parts) {
        const double dy = (y - p.cy) / p.ry;
        const double dx = (x - p.cx) / p.rx;
        const double d2 = dy * dy + dx * dx;
        if (d2 < 1.0) v = std::max(v, p.level * (1.0 - 0.6 * d2));
      }
      img[std::size_t{y} * cfg.cols + x] = v;
    }
  }
  return img;
}

IndexedDataset image_split(const ImageSynthConfig& cfg, const std::vector<std::vector<double>>& prototypes,
                           std::uint32_t count, Stream stream) {
  IndexedDataset ds;
  ds.meta = IndexedDataset::plain_u8_meta(cfg.rows * cfg.cols);
  ds.meta.item_shape = {cfg.rows, cfg.cols};
  ds.records.resize(count);
  const std::uint64_t base = derive_seed(cfg.seed, stream);
  const int rows = static_cast<int>(cfg.rows);
  const int cols = static_cast<int>(cfg.cols);
  for (std::uint32_t i = 0; i < count; ++i) {
    SeededRng rng(derive_seed(base, i));
    const std::uint32_t cls = static_cast<std::uint32_t>(uniform_below(rng, cfg.classes));
    const int sy = static_cast<int>(uniform_below(rng, 5)) - 2;
    const int sx = static_cast<int>(uniform_below(rng, 5)) - 2;
    const double contrast = 0.7 + 0.4 * uniform01(rng);
    const auto& proto = prototypes[cls];
    auto& r = ds.records[i];
    r.index = i;
    r.label = static_cast<std::uint16_t>(cls);
    r.payload.resize(ds.meta.n_in);
    for (int y = 0; y < rows; ++y) {
      for (int x = 0; x < cols; ++x) {
        const int py = y - sy;
        const int px = x - sx;
        double v = (py >= 0 && py < rows && px >= 0 && px < cols) ? proto[std::size_t(py) * cols + px] : 0.0;
        // Irwin-Hall(4) noise, roughly normal with sd 20.
        const double noise = (uniform01(rng) + uniform01(rng) + uniform01(rng) + uniform01(rng) - 2.0) * 34.6;
        v = v > 0 ? v * contrast + noise : std::max(0.0, noise - 20.0);
        r.payload[std::size_t(y) * cols + x] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return ds;
}

}  // namespace

std::pair<IndexedDataset, IndexedDataset> gen_synthetic_images(const ImageSynthConfig& cfg) {
  if (cfg.classes < 2 || cfg.classes > 255) throw std::invalid_argument("classes must be in [2, 255]");
  if (cfg.rows == 0 || cfg.cols == 0) throw std::invalid_argument("image dimensions must be positive");
  std::vector<std::vector<double>> prototypes;
  for (std::uint32_t c = 0; c < cfg.classes; ++c) prototypes.push_back(render_prototype(cfg, c));
  return {image_split(cfg, prototypes, cfg.n_train, kTrain), image_split(cfg, prototypes, cfg.n_val, kVal)};
}

}  // namespace hai
