#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ipgn {

/// Invalid user-facing configuration (mesh size, problem constants, solver names).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operand dimensions do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A quantity that must stay strictly inside the feasible region did not.
class InteriorViolation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Assembled data is internally inconsistent (e.g. nonpositive lumped mass).
class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CG met nonpositive curvature; carries the iterate at breakdown.
class IndefiniteOperatorError : public std::runtime_error {
 public:
  IndefiniteOperatorError(const std::string& what, std::vector<double> iterate, int iteration)
      : std::runtime_error(what), iterate_(std::move(iterate)), iteration_(iteration) {}
  const std::vector<double>& iterate() const { return iterate_; }
  int iteration() const { return iteration_; }

 private:
  std::vector<double> iterate_;
  int iteration_;
};

/// An inner elliptic block solve did not reach its tolerance.
class InnerSolveError : public std::runtime_error {
 public:
  InnerSolveError(const std::string& block, int iterations, double achieved)
      : std::runtime_error("inner solve for block " + block + " did not converge after " +
                           std::to_string(iterations) + " iterations (relative residual " +
                           std::to_string(achieved) + ")"),
        block_(block) {}
  const std::string& block() const { return block_; }

 private:
  std::string block_;
};

/// Backtracking drove the primal step below the minimum step length.
class LineSearchFailure : public std::runtime_error {
 public:
  LineSearchFailure(const std::string& what, double theta, double phi, double directional_derivative,
                    double last_alpha)
      : std::runtime_error(what),
        theta(theta),
        phi(phi),
        directional_derivative(directional_derivative),
        last_alpha(last_alpha) {}
  double theta;
  double phi;
  double directional_derivative;
  double last_alpha;
};

/// The outer loop hit its step budget.
class MaxStepsExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ipgn
