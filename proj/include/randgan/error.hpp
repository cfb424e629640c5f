#pragma once

#include <stdexcept>
#include <string>

namespace randgan {

// Single exception type for every recoverable failure in the pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace randgan
