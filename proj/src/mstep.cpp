#include "despca/mstep.hpp"

#include "despca/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace despca {
namespace {

void check_dims(const SymmetricMatrix& sigma_hat, const Vector& beta) {
  if (beta.size() != sigma_hat.dim()) {
    throw InvalidInput("dimension mismatch between covariance and loadings vector");
  }
}

// Sigma_hat * beta touching only the nonzero coordinates of beta; the
// iterates of the second step are sparse.
void sparse_product(const Matrix& s, const Vector& beta, Vector& out) {
  out.setZero(beta.size());
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    if (beta(k) != 0.0) out.noalias() += beta(k) * s.col(k);
  }
}

}  // namespace

FeasibleSet RiskProblem::feasible_set() const {
  if (lambda < 0) throw InvalidInput("lambda must be nonnegative");
  if (!(l1_budget > 0) || !(radius > 0)) {
    throw InvalidInput("l1 budget T and radius eta must be positive");
  }
  if (center.size() != sigma_hat.dim()) throw InvalidInput("center has wrong dimension");
  return FeasibleSet(l1_budget, center, radius);
}

double empirical_risk(const SymmetricMatrix& sigma_hat, const Vector& beta) {
  check_dims(sigma_hat, beta);
  const double sq = beta.squaredNorm();
  const double quad = beta.dot(sigma_hat.matrix() * beta);
  return 0.25 * sigma_hat.matrix().squaredNorm() - 0.5 * quad + 0.25 * sq * sq;
}

Vector risk_gradient(const SymmetricMatrix& sigma_hat, const Vector& beta) {
  check_dims(sigma_hat, beta);
  return -(sigma_hat.matrix() * beta) + beta.squaredNorm() * beta;
}

SymmetricMatrix risk_hessian(const SymmetricMatrix& sigma_hat, const Vector& beta) {
  check_dims(sigma_hat, beta);
  Matrix h = -sigma_hat.matrix();
  h.diagonal().array() += beta.squaredNorm();
  h.noalias() += 2.0 * beta * beta.transpose();
  return SymmetricMatrix(h);
}

LoadingsEstimate solve_second_step(const RiskProblem& problem, const Vector& start,
                                   const SecondStepOptions& options) {
  check_dims(problem.sigma_hat, start);
  const FeasibleSet set = problem.feasible_set();
  const Matrix& s = problem.sigma_hat.matrix();
  const double constant = 0.25 * s.squaredNorm();
  Vector product(start.size());

  auto smooth = [&](const Vector& beta, Vector& grad) {
    sparse_product(s, beta, product);
    const double sq = beta.squaredNorm();
    grad = sq * beta - product;
    return constant - 0.5 * beta.dot(product) + 0.25 * sq * sq;
  };

  ProxGradientOptions pg;
  pg.max_iter = options.max_iter;
  pg.tol = options.tol;
  pg.record_objective = options.record_objective;
  ProxGradientResult r = minimize_composite(smooth, set, problem.lambda, start, pg);

  LoadingsEstimate out;
  out.beta = std::move(r.x);
  out.risk_value = r.smooth_value;
  out.objective = r.objective;
  out.kkt_residual = r.stationarity;
  out.fixed_point_residual = r.fixed_point_residual;
  out.l1_active = set.l1_active(out.beta);
  out.l2_active = set.l2_active(out.beta);
  out.iterations = r.iterations;
  out.converged = r.converged;
  out.objective_trace = std::move(r.objective_trace);
  return out;
}

double check_stationarity(const RiskProblem& problem, const Vector& beta) {
  check_dims(problem.sigma_hat, beta);
  const FeasibleSet set = problem.feasible_set();
  if (!set.contains(beta, 1e-8)) {
    throw InvalidInput("stationarity check requires a feasible point");
  }
  return stationarity_residual(set, problem.lambda, beta,
                               risk_gradient(problem.sigma_hat, beta));
}

double default_radius(const SymmetricMatrix& sigma_hat) {
  const EigenDecomposition top = top_eigenpairs(sigma_hat, 2);
  const double l1 = std::max(top.values(0), 0.0);
  const double l2 = top.values.size() > 1 ? std::max(top.values(1), 0.0) : 0.0;
  return std::max(0.5 * (std::sqrt(l1) - std::sqrt(l2)), 0.1);
}

double default_l1_budget(const Vector& beta_init) { return 2.0 * beta_init.lpNorm<1>() + 1.0; }

}  // namespace despca
