#include "randgan/image.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "randgan/error.hpp"

namespace randgan {

namespace {
void check_shape(int height, int width) {
  if (height <= 0 || width <= 0)
    throw Error("image shape must be positive, got " + std::to_string(height) + "x" + std::to_string(width));
}
}  // namespace

Image::Image(int height, int width, ValueRange range, float fill)
    : height_(height), width_(width), range_(range) {
  check_shape(height, width);
  pixels_.assign(static_cast<std::size_t>(height) * width, fill);
}

Image::Image(int height, int width, ValueRange range, std::vector<float> pixels)
    : height_(height), width_(width), range_(range), pixels_(std::move(pixels)) {
  check_shape(height, width);
  if (pixels_.size() != static_cast<std::size_t>(height) * width)
    throw Error("pixel buffer size does not match image shape");
}

bool Image::within_range() const {
  return std::all_of(pixels_.begin(), pixels_.end(), [this](float v) { return range_.contains(v); });
}

BinaryMask::BinaryMask(int height, int width, std::uint8_t fill) : height_(height), width_(width) {
  check_shape(height, width);
  if (fill > 1) throw Error("mask values must be 0 or 1");
  values_.assign(static_cast<std::size_t>(height) * width, fill);
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> values)
    : height_(height), width_(width), values_(std::move(values)) {
  check_shape(height, width);
  if (values_.size() != static_cast<std::size_t>(height) * width)
    throw Error("mask buffer size does not match mask shape");
  if (std::any_of(values_.begin(), values_.end(), [](std::uint8_t v) { return v > 1; }))
    throw Error("mask values must be 0 or 1");
}

std::size_t BinaryMask::count() const {
  return std::accumulate(values_.begin(), values_.end(), std::size_t{0});
}

}  // namespace randgan
