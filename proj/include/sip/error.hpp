#pragma once

#include <stdexcept>
#include <string>

namespace sip {

/// Parameters or configurations that violate a model precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A closed-form expression whose denominator vanishes for the given parameters.
class DegenerateDenominator : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Truncated state space too large for the index type or the solver budget.
class SizeOverflow : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Right-hand side of a Poisson-type equation is not orthogonal to the stationary measure.
class SolvabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Factorization or iterative solve failed.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sip
