#pragma once

#include <stdexcept>
#include <string>

namespace ldl {

/// Input violates a documented contract (bad model, bad config, bad arguments).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numeric tolerance contract was not met.
class ToleranceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative/limiting procedure did not converge.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 1 + gamma_eps gamma_{1-eps} D_eps D_{1-eps} is (numerically) singular.
class SingularCoefficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A function was evaluated outside its domain (e.g. 1/w off support).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Symbolic layer: a product of distributions outside the closed table,
/// or a term that cannot be reduced (e.g. a bound variable in two deltas).
class AlgebraError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ldl
