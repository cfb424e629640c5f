#include "randgan/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "randgan/error.hpp"

namespace randgan {

namespace {

using Rgb = std::array<float, 3>;

constexpr std::array<Rgb, 6> kPalette{{
    {31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189}, {140, 86, 75}}};

struct Canvas {
  ColorImage img;

  void set(int x, int y, const Rgb& c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    auto* p = &img.data[(static_cast<std::size_t>(y) * img.width + x) * 3];
    std::copy(c.begin(), c.end(), p);
  }

  void dot(int x, int y, const Rgb& c, int radius) {
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx) set(x + dx, y + dy, c);
  }

  // Bresenham; `dash` > 0 skips alternate runs of that many pixels.
  void line(int x0, int y0, int x1, int y1, const Rgb& c, int radius = 0, int dash = 0) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy, n = 0;
    while (true) {
      if (dash == 0 || (n / dash) % 2 == 0) dot(x0, y0, c, radius);
      ++n;
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
};

}  // namespace

ColorImage render_roc_plot(const std::vector<RocCurve>& curves, int size) {
  if (size < 64) throw Error("plot: size must be at least 64 pixels");
  if (curves.empty()) throw Error("plot: no curves to draw");
  Canvas cv{{size, size, 3, ValueRange::byte(), std::vector<float>(static_cast<std::size_t>(size) * size * 3, 255.0f)}};

  const int margin = size / 10;
  const int span = size - 2 * margin;
  auto px = [&](double fpr) { return margin + static_cast<int>(std::lround(fpr * span)); };
  auto py = [&](double tpr) { return size - margin - static_cast<int>(std::lround(tpr * span)); };

  const Rgb grid{225, 225, 225}, axis{0, 0, 0}, chance{150, 150, 150};
  for (int k = 1; k < 4; ++k) {
    cv.line(px(k / 4.0), py(0), px(k / 4.0), py(1), grid);
    cv.line(px(0), py(k / 4.0), px(1), py(k / 4.0), grid);
  }
  cv.line(px(0), py(0), px(1), py(1), chance, 0, 6);
  cv.line(px(0), py(0), px(1), py(0), axis);
  cv.line(px(0), py(0), px(0), py(1), axis);
  cv.line(px(1), py(0), px(1), py(1), axis);
  cv.line(px(0), py(1), px(1), py(1), axis);
  for (int k = 0; k <= 4; ++k) {
    cv.line(px(k / 4.0), py(0), px(k / 4.0), py(0) + 5, axis);
    cv.line(px(0) - 5, py(k / 4.0), px(0), py(k / 4.0), axis);
  }

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& colour = kPalette[i % kPalette.size()];
    const auto& pts = curves[i].roc.points;
    for (std::size_t k = 1; k < pts.size(); ++k)
      cv.line(px(pts[k - 1].fpr), py(pts[k - 1].tpr), px(pts[k].fpr), py(pts[k].tpr), colour, 1);
    const int sw = std::max(4, size / 64);
    const int sx = size - margin - 2 * sw;
    const int sy = size - margin - static_cast<int>(curves.size() - i) * 2 * sw - sw;
    for (int y = 0; y < sw; ++y)
      for (int x = 0; x < sw; ++x) cv.set(sx + x, sy + y, colour);
  }
  return cv.img;
}

}  // namespace randgan
