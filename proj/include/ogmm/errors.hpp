#pragma once

#include <stdexcept>
#include <string>

namespace ogmm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs with inconsistent shapes (p, q, d, batch width).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Failures of numerical routines. Subclasses name the specific cause;
/// the CLI maps all of them to exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

class InitializationError : public NumericError {
 public:
  using NumericError::NumericError;
};

class SingularSystem : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonFiniteUpdate : public NumericError {
 public:
  using NumericError::NumericError;
};

class RankDeficient : public NumericError {
 public:
  using NumericError::NumericError;
};

class OptimizerFailed : public NumericError {
 public:
  using NumericError::NumericError;
};

class NoConvergence : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegenerateSeries : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegenerateScale : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Raised by the kernel LRV query with fewer than two observations.
class Underflow : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Series too short for the requested number of wavelet levels.
class TooShort : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Sargan-Hansen is undefined when q == p.
class ExactIdentification : public Error {
 public:
  using Error::Error;
};

/// Malformed snapshot or configuration documents.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace ogmm
