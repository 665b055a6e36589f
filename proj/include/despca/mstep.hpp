#pragma once

#include "despca/linalg.hpp"
#include "despca/prox_gradient.hpp"

namespace despca {

/// min R_n(beta) + lambda ||beta||_1  s.t. ||beta||_1 <= l1_budget,
///                                       ||beta - center||_2 <= radius.
/// Holds a reference to the covariance; keep it alive while the problem is used.
struct RiskProblem {
  const SymmetricMatrix& sigma_hat;
  double lambda = 0.0;
  double l1_budget = 1.0;
  double radius = 1.0;
  Vector center;

  FeasibleSet feasible_set() const;
};

struct LoadingsEstimate {
  Vector beta;
  double risk_value = 0.0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  double fixed_point_residual = 0.0;
  bool l1_active = false;
  bool l2_active = false;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

struct SecondStepOptions {
  int max_iter = 20000;
  double tol = 1e-8;
  bool record_objective = false;
};

/// R_n(beta) = 1/4 ||Sigma_hat - beta beta^T||_F^2, via the expansion
/// 1/4 tr(Sigma_hat^2) - 1/2 beta' Sigma_hat beta + 1/4 ||beta||^4.
double empirical_risk(const SymmetricMatrix& sigma_hat, const Vector& beta);

/// -Sigma_hat beta + ||beta||^2 beta
Vector risk_gradient(const SymmetricMatrix& sigma_hat, const Vector& beta);

/// -Sigma_hat + ||beta||^2 I + 2 beta beta^T
SymmetricMatrix risk_hessian(const SymmetricMatrix& sigma_hat, const Vector& beta);

LoadingsEstimate solve_second_step(const RiskProblem& problem, const Vector& start,
                                   const SecondStepOptions& options = {});

/// Nonnegative stationarity residual; zero exactly at stationary points.
double check_stationarity(const RiskProblem& problem, const Vector& beta);

/// Locality radius 0.5 * (sqrt(l1) - sqrt(l2)) from the two largest
/// eigenvalues of Sigma_hat, floored at 0.1.
double default_radius(const SymmetricMatrix& sigma_hat);

/// 2 ||beta_init||_1 + 1.
double default_l1_budget(const Vector& beta_init);

}  // namespace despca
