#pragma once

#include <stdexcept>
#include <string>

namespace broute {

// Malformed or corrupt persisted data (datasets, checkpoints, reports).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unusable run configuration or command-line usage.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace broute
