#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace randgan {

struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;

  static constexpr ValueRange unit() { return {0.0, 1.0}; }
  static constexpr ValueRange symmetric() { return {-1.0, 1.0}; }
  static constexpr ValueRange byte() { return {0.0, 255.0}; }

  double width() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
  friend bool operator==(const ValueRange&, const ValueRange&) = default;
};

// Single-channel float image, row-major, with a declared value range.
class Image {
 public:
  Image() = default;
  Image(int height, int width, ValueRange range, float fill = 0.0f);
  Image(int height, int width, ValueRange range, std::vector<float> pixels);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }
  const ValueRange& range() const { return range_; }
  void set_range(ValueRange r) { range_ = r; }

  float& at(int y, int x) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int y, int x) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<float> pixels() & { return pixels_; }
  std::span<const float> pixels() const& { return pixels_; }
  std::span<const float> pixels() const&& = delete;

  // True when every pixel lies inside the declared range.
  bool within_range() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  ValueRange range_{};
  std::vector<float> pixels_;
};

// Interleaved multi-channel image as read from disk (1 or 3 channels, 8-bit scale).
struct ColorImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  ValueRange range = ValueRange::byte();
  std::vector<float> data;

  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Binary mask, 1 = foreground.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, std::uint8_t fill = 0);
  BinaryMask(int height, int width, std::vector<std::uint8_t> values);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  std::uint8_t& at(int y, int x) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int y, int x) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const std::uint8_t> values() const { return values_; }
  std::size_t count() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> values_;
};

}  // namespace randgan
