#pragma once

#include <stdexcept>
#include <string>

namespace duckling {

/// Input violates a data-model invariant (malformed row, bad label, leakage, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical operation undefined for the given input (e.g. zero-norm embedding).
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace duckling
