#pragma once

#include <stdexcept>
#include <string>

namespace fatreat {

/// Bad arguments or dimension mismatches supplied by the caller.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration that violates a model invariant (e.g. a non-PSD switching
/// regression covariance, unknown config keys).
class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Linear algebra or sampler state failure (indefinite matrix, non-finite
/// chain state).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A truncation interval or tail probability too small to evaluate in double
/// precision.
class DegenerateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Panel too short to identify the factor loadings.
class IdentificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fatreat
