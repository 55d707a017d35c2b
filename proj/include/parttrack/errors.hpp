#pragma once

#include <stdexcept>
#include <string>

namespace parttrack {

// Bad argument values (non-positive temperature, eps out of range, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tensor shapes or input dimensions that do not fit together.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke an interface contract (e.g. backward() on a non-scalar).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite values entering or leaving an operation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Box estimation from zero target parts.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed files on disk, short sequences, missing frames.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tracker initialization on an unusable first-frame box.
class TrackingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Config keys, values and checkpoint compatibility.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace parttrack
