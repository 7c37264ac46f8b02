#pragma once

#include <stdexcept>
#include <string>

namespace kneeflex {

/// Invalid user-supplied configuration (bad ranges, missing inputs, malformed flags).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Filesystem or codec failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (checkpoint magic, truncated records, CSV schema).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes that do not chain.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Point at or behind the camera plane.
class ProjectionError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Keypoints could not be framed inside the raster after the retry budget.
class FramingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kneeflex
