#pragma once

#include <stdexcept>
#include <string>

namespace loceq {

/// Invalid input or a computation that cannot be carried out for the given
/// parameters. The CLI maps it to exit code 1.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A requested dimension exceeds a configured size cap.
class CapExceeded : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A graph constructor cannot satisfy its degree/band constraints.
class InfeasibleError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// An iterative method ran out of iterations.
class ConvergenceError : public DomainError {
 public:
  using DomainError::DomainError;
};

}  // namespace loceq
