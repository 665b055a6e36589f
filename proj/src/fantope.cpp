#include "despca/fantope.hpp"

#include "despca/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace despca {

FantopeSolution solve_fantope(const SymmetricMatrix& sigma_hat, double lambda,
                              const FantopeOptions& options) {
  if (lambda < 0) throw InvalidInput("Fantope penalty must be nonnegative");
  if (!(options.penalty > 0)) throw InvalidInput("ADMM penalty parameter must be positive");
  const Eigen::Index p = sigma_hat.dim();
  double rho = options.penalty;
  const double sigma_norm = sigma_hat.matrix().norm();

  // X carries the Fantope block, Y the l1 block, U the scaled dual.
  Matrix x = Matrix::Identity(p, p) / static_cast<double>(p);
  Matrix y = x;
  Matrix u = Matrix::Zero(p, p);

  FantopeSolution out;
  out.z = SymmetricMatrix(x);
  double best = std::numeric_limits<double>::infinity();
  int iter = 0;
  while (iter < options.max_iter) {
    ++iter;
    x = project_fantope(SymmetricMatrix(y - u + sigma_hat.matrix() / rho)).matrix();
    Matrix y_next = soft_threshold(Matrix(x + u), lambda / rho);
    const Matrix u_step = x - y_next;
    const double primal_abs = u_step.norm();
    const double dual_abs = rho * (y_next - y).norm();
    if (options.record_merit) {
      out.merit.push_back(rho * (y_next - y).squaredNorm() + rho * u_step.squaredNorm());
    }
    y.swap(y_next);
    u += u_step;
    if (!std::isfinite(primal_abs) || !std::isfinite(dual_abs)) {
      throw NumericalError("Fantope ADMM produced non-finite iterates at iteration " +
                           std::to_string(iter));
    }
    // per-entry RMS, relative to the iterate size and to the dual size (U
    // stays zero when lambda = 0, so Sigma_hat sets the floor)
    const double entries = static_cast<double>(p);
    const double primal = primal_abs / (entries * std::max({x.norm(), y.norm(), 1e-12}));
    const double dual = dual_abs / (entries * std::max({rho * u.norm(), sigma_norm, 1e-12}));
    const double worst = std::max(primal, dual);
    if (worst < best) {
      best = worst;
      out.z = SymmetricMatrix(x);
      out.primal_residual = primal;
      out.dual_residual = dual;
      out.iterations = iter;
    }
    if (worst <= options.tol) {
      out.converged = true;
      break;
    }
    // residual balancing on the relative residuals; U is the scaled dual so
    // it rescales with rho
    if (options.adaptive_penalty && iter <= options.adapt_until && iter % 10 == 0) {
      if (primal > 10.0 * dual) {
        rho *= 2.0;
        u /= 2.0;
      } else if (dual > 10.0 * primal) {
        rho /= 2.0;
        u *= 2.0;
      }
    }
  }
  out.final_penalty = rho;
  const Matrix& z = out.z.matrix();
  out.objective = (sigma_hat.matrix().cwiseProduct(z)).sum() - lambda * z.cwiseAbs().sum();
  if (!out.converged) out.iterations = iter;
  return out;
}

InitialEstimate extract_initial(const FantopeSolution& solution,
                                const SymmetricMatrix& sigma_hat) {
  const Matrix& z = solution.z.matrix();
  if (z.rows() != sigma_hat.dim()) throw InvalidInput("Fantope solution has wrong dimension");
  double scale = sigma_hat.matrix().cwiseProduct(z).sum();
  if (scale < -1e-6) {
    throw NumericalError("tr(Sigma_hat Z) = " + std::to_string(scale) +
                         " is negative; the Fantope solve failed");
  }
  InitialEstimate out;
  if (scale < 0) {
    scale = 0.0;
    out.scale_clipped = true;
  }
  const EigenDecomposition top = top_eigenpairs(solution.z, 1);
  out.leading_vector = top.vectors.col(0);
  out.scale = scale;
  out.beta_init = std::sqrt(scale) * out.leading_vector;
  return out;
}

}  // namespace despca
