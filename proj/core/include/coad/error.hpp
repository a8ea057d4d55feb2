#pragma once

#include <stdexcept>
#include <string>

namespace coad {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents that do not line up for an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameters, config keys or generator specs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable / unwritable files and malformed rasters.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace coad
