#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace eprlab {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied an argument outside the operation's domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Two objects that must share a Fock space do not.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A matrix fails one of the density-matrix invariants (Hermiticity, trace, positivity).
class InvariantViolation : public Error {
 public:
  InvariantViolation(std::string invariant, const std::string& detail)
      : Error(invariant + ": " + detail), invariant_(std::move(invariant)) {}
  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

/// The quadrature grid misses too much probability mass.
class InsufficientSupport : public Error {
 public:
  using Error::Error;
};

/// Homodyne estimator division by s or c at zero.
class UndefinedEstimator : public Error {
 public:
  using Error::Error;
};

/// Model probability of an occupied bin underflowed even after flooring.
class IllConditionedData : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or configuration.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Command-line usage problem: bad flags, unknown identifiers, empty inputs.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace eprlab
