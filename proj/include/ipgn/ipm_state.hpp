#pragma once

#include "ipgn/problem.hpp"
#include "ipgn/vector_ops.hpp"

namespace ipgn {

/// Primal-dual iterate with the barrier parameter.
struct IpmState {
  Vector u;
  Vector rho;
  Vector lambda;
  Vector z;
  double mu = 1.0;
};

/// rho - rho_lower; throws InteriorViolation if any entry is not positive.
Vector bound_gap(const ModelProblem& problem, const Vector& rho);

struct KktResiduals {
  Vector r_u;       // grad_u f + J_u^T lambda
  Vector r_rho;     // grad_rho f + J_rho^T lambda - M_L z
  Vector r_lambda;  // c(u, rho)
  Vector r_z;       // z .* gap - mu
};

/// Residuals of the perturbed optimality conditions at the given barrier parameter.
KktResiduals kkt_residuals(const ModelProblem& problem, const IpmState& s, double mu);

}  // namespace ipgn
