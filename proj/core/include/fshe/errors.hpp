#pragma once

#include <stdexcept>
#include <string>

namespace fshe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument or precondition is outside the operation's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A mathematical hypothesis of a check is not satisfied (e.g. t > (R/2)^alpha).
/// Distinguished from DomainError so sweeps can skip instead of abort.
class HypothesisNotMet : public Error {
 public:
  using Error::Error;
};

/// A numerical method failed its own error estimate.
class NumericalAccuracyError : public Error {
 public:
  using Error::Error;
};

/// The requested variant does not support this operation.
class UnsupportedVariant : public Error {
 public:
  using Error::Error;
};

/// Evaluation at a singular point of a kernel.
class SingularityError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Misuse of a stateful object, e.g. stepping a field that already hit its truncation level.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace fshe
