#pragma once

#include <stdexcept>
#include <string>

namespace nullcone {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain where an operation is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Array length does not match the grid it is applied to.
class SizeMismatch : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of a checker does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Conformal factor too close to zero to invert.
class DegenerateChart : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Evolution exceeded its amplitude cap.
class BlowUp : public Error {
 public:
  using Error::Error;
};

/// Adaptive integration could not reach the requested local error.
class StepFailure : public Error {
 public:
  using Error::Error;
};

/// Too few or unusable samples for a fit.
class DegenerateFit : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Malformed configuration or input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace nullcone
