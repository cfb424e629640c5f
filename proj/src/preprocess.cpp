#include "randgan/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "randgan/error.hpp"

namespace randgan {

void PreprocessConfig::validate() const {
  if (target_size <= 0) throw Error("preprocess: target_size must be positive");
  if (!(output_range == ValueRange::unit() || output_range == ValueRange::symmetric()))
    throw Error("preprocess: output_range must be [0,1] or [-1,1]");
}

Image to_grayscale(const ColorImage& img) {
  if (img.channels == 1) return Image(img.height, img.width, img.range, img.data);
  if (img.channels != 3)
    throw Error("to_grayscale: expected 3 channels, got " + std::to_string(img.channels));
  Image out(img.height, img.width, img.range);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double v = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
      out.at(y, x) = static_cast<float>(std::clamp(v, img.range.lo, img.range.hi));
    }
  }
  return out;
}

namespace {

// Source coordinate of destination pixel centre under half-pixel alignment.
double source_coord(int dst, double scale) { return (dst + 0.5) * scale - 0.5; }

}  // namespace

Image resize(const Image& img, int size, Interpolation mode) {
  if (size <= 0) throw Error("resize: size must be positive");
  if (img.empty()) throw Error("resize: empty image");
  if (img.height() == size && img.width() == size) return img;

  Image out(size, size, img.range());
  const double sy = static_cast<double>(img.height()) / size;
  const double sx = static_cast<double>(img.width()) / size;
  const auto lo = static_cast<float>(img.range().lo);
  const auto hi = static_cast<float>(img.range().hi);

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      float v;
      if (mode == Interpolation::nearest) {
        int iy = std::min(static_cast<int>((y + 0.5) * sy), img.height() - 1);
        int ix = std::min(static_cast<int>((x + 0.5) * sx), img.width() - 1);
        v = img.at(iy, ix);
      } else {
        double fy = std::clamp(source_coord(y, sy), 0.0, img.height() - 1.0);
        double fx = std::clamp(source_coord(x, sx), 0.0, img.width() - 1.0);
        int y0 = static_cast<int>(std::floor(fy));
        int x0 = static_cast<int>(std::floor(fx));
        int y1 = std::min(y0 + 1, img.height() - 1);
        int x1 = std::min(x0 + 1, img.width() - 1);
        double wy = fy - y0;
        double wx = fx - x0;
        double top = (1 - wx) * img.at(y0, x0) + wx * img.at(y0, x1);
        double bottom = (1 - wx) * img.at(y1, x0) + wx * img.at(y1, x1);
        v = static_cast<float>((1 - wy) * top + wy * bottom);
      }
      out.at(y, x) = std::clamp(v, lo, hi);
    }
  }
  return out;
}

BinaryMask resize_mask(const BinaryMask& mask, int size) {
  if (size <= 0) throw Error("resize_mask: size must be positive");
  if (mask.height() == size && mask.width() == size) return mask;
  BinaryMask out(size, size);
  const double sy = static_cast<double>(mask.height()) / size;
  const double sx = static_cast<double>(mask.width()) / size;
  for (int y = 0; y < size; ++y) {
    int iy = std::min(static_cast<int>((y + 0.5) * sy), mask.height() - 1);
    for (int x = 0; x < size; ++x) {
      int ix = std::min(static_cast<int>((x + 0.5) * sx), mask.width() - 1);
      out.at(y, x) = mask.at(iy, ix);
    }
  }
  return out;
}

Image normalize(const Image& img, ValueRange target) {
  Image out(img.height(), img.width(), target);
  const ValueRange src = img.range();
  auto dst = out.pixels();
  auto in = img.pixels();
  if (src.width() == 0.0) {
    std::fill(dst.begin(), dst.end(), static_cast<float>((target.lo + target.hi) / 2));
    return out;
  }
  const double scale = target.width() / src.width();
  const double tlo = std::min(target.lo, target.hi);
  const double thi = std::max(target.lo, target.hi);
  for (std::size_t i = 0; i < in.size(); ++i) {
    double v = target.lo + (in[i] - src.lo) * scale;
    dst[i] = static_cast<float>(std::clamp(v, tlo, thi));
  }
  return out;
}

Image apply_mask(const Image& img, const BinaryMask& mask) {
  if (img.height() != mask.height() || img.width() != mask.width())
    throw Error("apply_mask: mask " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                " does not match image " + std::to_string(img.height()) + "x" + std::to_string(img.width()));
  Image out = img;
  const auto background = static_cast<float>(img.range().lo);
  auto px = out.pixels();
  auto m = mask.values();
  for (std::size_t i = 0; i < px.size(); ++i)
    if (m[i] == 0) px[i] = background;
  return out;
}

Image preprocess(const ColorImage& img, const PreprocessConfig& config, const BinaryMask* mask) {
  config.validate();
  Image out = normalize(resize(to_grayscale(img), config.target_size, config.interpolation),
                        config.output_range);
  if (mask != nullptr) out = apply_mask(out, resize_mask(*mask, config.target_size));
  return out;
}

}  // namespace randgan
