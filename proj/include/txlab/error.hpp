#pragma once

#include <stdexcept>
#include <string>

namespace txlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed tree, region or process (wrong sizes, broken invariants).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a function (e.g. U at a non-positive point).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Doob decomposition requested for a process that is not a supermartingale.
class DecompositionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration of an experiment (counterexample, schedule, generator).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure that is not a solver convergence issue.
class NumericError : public Error {
 public:
  using Error::Error;
};

class TiltTooLargeError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A candidate shadow price leaves the bid-ask spread.
class ExtractionError : public Error {
 public:
  using Error::Error;
};

/// Internal consistency check of a construction failed.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// No consistent price system exists. `node` is where the backward induction
/// of attainable frictionless prices became empty.
class InfeasibilityError : public Error {
 public:
  InfeasibilityError(const std::string& what, int node, double lo, double hi)
      : Error(what), node_(node), lo_(lo), hi_(hi) {}
  int node() const noexcept { return node_; }
  /// Attainable interval from the subtree before intersecting with the spread.
  double attainable_lo() const noexcept { return lo_; }
  double attainable_hi() const noexcept { return hi_; }

 private:
  int node_;
  double lo_, hi_;
};

/// Interior-point solve did not converge; carries the last objective value.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double best_objective, int iterations)
      : Error(what), best_objective_(best_objective), iterations_(iterations) {}
  double best_objective() const noexcept { return best_objective_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double best_objective_;
  int iterations_;
};

}  // namespace txlab
