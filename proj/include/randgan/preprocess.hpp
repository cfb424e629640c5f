#pragma once

#include <optional>

#include "randgan/image.hpp"

namespace randgan {

enum class Interpolation { bilinear, nearest };

struct PreprocessConfig {
  int target_size = 128;
  ValueRange output_range = ValueRange::symmetric();
  Interpolation interpolation = Interpolation::bilinear;

  // Throws unless target_size > 0 and output_range is [0,1] or [-1,1].
  void validate() const;
};

// Luminance 0.299 R + 0.587 G + 0.114 B. Single-channel input passes through.
Image to_grayscale(const ColorImage& img);

// Bilinear (half-pixel centres, edge clamped) or nearest resize to size x size,
// clamped to the declared range afterwards.
Image resize(const Image& img, int size, Interpolation mode = Interpolation::bilinear);

// Nearest-neighbour mask resampling; used to bring segmentation-resolution masks
// down to the GAN input resolution.
BinaryMask resize_mask(const BinaryMask& mask, int size);

// Affine map of the image's declared range onto `target`. A degenerate source
// range maps every pixel to the midpoint of `target`.
Image normalize(const Image& img, ValueRange target);

// Pixels under mask=0 become the minimum of the declared range.
Image apply_mask(const Image& img, const BinaryMask& mask);

// grayscale -> resize -> normalize -> optional mask (resized to the target with
// nearest neighbour when its resolution differs).
Image preprocess(const ColorImage& img, const PreprocessConfig& config,
                 const BinaryMask* mask = nullptr);

}  // namespace randgan
