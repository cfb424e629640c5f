#pragma once

#include <string>
#include <vector>

#include "randgan/fusion.hpp"
#include "randgan/image.hpp"

namespace randgan {

struct RocCurve {
  std::string name;
  RocResult roc;
};

// Rasterises ROC curves onto a white RGB canvas: unit-square axes with a
// quarter grid, the chance diagonal, and one coloured polyline per curve with
// a matching swatch in the lower-right legend column.
ColorImage render_roc_plot(const std::vector<RocCurve>& curves, int size = 512);

}  // namespace randgan
