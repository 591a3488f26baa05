#pragma once

#include <stdexcept>
#include <string>

namespace ppn {

// Tensor or map dimensions disagree with what an operation requires.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A configuration value violates its documented range.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed bytes on disk (sweeps, model files, images).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested data outside what a store or stream holds.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf where a finite value is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ppn
