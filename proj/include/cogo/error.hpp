#pragma once

#include <stdexcept>
#include <string>

namespace cogo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform; the message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A tensor or hook handle refers to a graph that has since been reset.
class StaleHandleError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numeric computation produced NaN or infinity.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint file is malformed, truncated or does not match the expected spec.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// File system or image codec failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cogo
