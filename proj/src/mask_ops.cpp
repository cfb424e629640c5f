#include "randgan/mask_ops.hpp"

#include <algorithm>
#include <string>

#include "randgan/error.hpp"

namespace randgan {

void MaskPostprocessConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error("postprocess: threshold must be in (0,1)");
  if (morph_kernel < 1 || morph_kernel % 2 == 0)
    throw Error("postprocess: morph_kernel must be odd and >= 1, got " + std::to_string(morph_kernel));
}

BinaryMask threshold_mask(const Image& soft, double threshold) {
  std::vector<std::uint8_t> v(soft.size());
  auto px = soft.pixels();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = px[i] > threshold ? 1 : 0;
  return BinaryMask(soft.height(), soft.width(), std::move(v));
}

namespace {

// Separable min/max filter; `keep` is the value that survives (1 for dilation,
// 0 for erosion) whenever any pixel in the window carries it.
BinaryMask window_filter(const BinaryMask& m, int kernel, std::uint8_t keep) {
  if (kernel < 1 || kernel % 2 == 0) throw Error("morphology: kernel must be odd and >= 1");
  const int r = kernel / 2;
  const int h = m.height(), w = m.width();
  BinaryMask rows(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 1 - keep;
      for (int k = std::max(0, x - r); k <= std::min(w - 1, x + r); ++k)
        if (m.at(y, k) == keep) { v = keep; break; }
      rows.at(y, x) = v;
    }
  BinaryMask out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 1 - keep;
      for (int k = std::max(0, y - r); k <= std::min(h - 1, y + r); ++k)
        if (rows.at(k, x) == keep) { v = keep; break; }
      out.at(y, x) = v;
    }
  return out;
}

}  // namespace

BinaryMask erode(const BinaryMask& m, int kernel) { return window_filter(m, kernel, 0); }
BinaryMask dilate(const BinaryMask& m, int kernel) { return window_filter(m, kernel, 1); }
BinaryMask morph_open(const BinaryMask& m, int kernel) { return dilate(erode(m, kernel), kernel); }
BinaryMask morph_close(const BinaryMask& m, int kernel) { return erode(dilate(m, kernel), kernel); }

BinaryMask postprocess_mask(const BinaryMask& mask, const MaskPostprocessConfig& config) {
  config.validate();
  BinaryMask out = mask;
  for (MorphOp op : config.operations)
    out = op == MorphOp::open ? morph_open(out, config.morph_kernel) : morph_close(out, config.morph_kernel);
  return out;
}

BinaryMask postprocess_mask(const Image& soft, const MaskPostprocessConfig& config) {
  config.validate();
  if (!(soft.range() == ValueRange::unit()) || !soft.within_range())
    throw Error("postprocess: soft mask must take values in [0,1]");
  return postprocess_mask(threshold_mask(soft, config.threshold), config);
}

double dice(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw Error("dice: mask shapes differ");
  std::size_t inter = 0, na = 0, nb = 0;
  auto va = a.values();
  auto vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) {
    na += va[i];
    nb += vb[i];
    inter += va[i] & vb[i];
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

}  // namespace randgan
