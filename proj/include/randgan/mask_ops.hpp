#pragma once

#include <vector>

#include "randgan/image.hpp"

namespace randgan {

enum class MorphOp { open, close };

struct MaskPostprocessConfig {
  double threshold = 0.5;
  int morph_kernel = 3;
  std::vector<MorphOp> operations{MorphOp::open, MorphOp::close};

  void validate() const;
};

BinaryMask threshold_mask(const Image& soft, double threshold);

// Square structuring element of side `kernel`. Pixels outside the image never
// constrain the result: erosion treats them as foreground, dilation as background.
BinaryMask erode(const BinaryMask& m, int kernel);
BinaryMask dilate(const BinaryMask& m, int kernel);
BinaryMask morph_open(const BinaryMask& m, int kernel);
BinaryMask morph_close(const BinaryMask& m, int kernel);

// Threshold, then apply the configured open/close sequence.
BinaryMask postprocess_mask(const Image& soft, const MaskPostprocessConfig& config);
BinaryMask postprocess_mask(const BinaryMask& mask, const MaskPostprocessConfig& config);

// Soerensen-Dice coefficient 2|a∩b| / (|a|+|b|); 1.0 when both are empty.
double dice(const BinaryMask& a, const BinaryMask& b);

}  // namespace randgan
