#include "despca/nodewise.hpp"

#include "despca/error.hpp"
#include "despca/prox_gradient.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace despca {
namespace {

double lipschitz_step(const SymmetricMatrix& a) {
  const Vector ev = symmetric_eigen(a).values;
  const double norm = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  return norm > 0 ? 0.5 / norm : 1.0;
}

}  // namespace

NodewiseColumn nodewise_column(const SymmetricMatrix& a, std::size_t j, double lambda_j,
                               double budget_j, const NodewiseOptions& options) {
  const Eigen::Index p = a.dim();
  const auto jj = static_cast<Eigen::Index>(j);
  if (jj >= p) throw InvalidInput("nodewise column index out of range");
  if (lambda_j < 0) throw InvalidInput("nodewise penalty must be nonnegative");
  if (!(budget_j > 0)) throw InvalidInput("nodewise l1 budget must be positive");

  const Matrix& m = a.matrix();
  // The optimization variable x lives in R^p with x_j pinned at 0 (its
  // gradient entry is zeroed), so Gamma = e_j - x. A * Gamma is accumulated
  // over the support of x only.
  Vector a_gamma(p);
  auto smooth = [&](const Vector& x, Vector& grad) {
    a_gamma = m.col(jj);
    for (Eigen::Index k = 0; k < p; ++k) {
      if (x(k) != 0.0) a_gamma.noalias() -= x(k) * m.col(k);
    }
    // Gamma^T A Gamma = (A Gamma)_j - x^T (A Gamma)
    const double value = a_gamma(jj) - x.dot(a_gamma);
    grad = -2.0 * a_gamma;
    grad(jj) = 0.0;
    return value;
  };

  const FeasibleSet set(budget_j, std::nullopt, std::numeric_limits<double>::infinity());
  ProxGradientOptions pg;
  pg.max_iter = options.max_iter;
  pg.tol = options.tol;
  pg.initial_step = options.max_step > 0 ? options.max_step : lipschitz_step(a);
  const ProxGradientResult r = minimize_composite(smooth, set, lambda_j, Vector::Zero(p), pg);

  NodewiseColumn col;
  col.j = j;
  col.big_gamma = -r.x;
  col.big_gamma(jj) = 1.0;
  col.gamma.resize(p - 1);
  col.gamma << r.x.head(jj), r.x.tail(p - jj - 1);
  const double l1 = col.gamma.lpNorm<1>();
  col.tau_sq = r.smooth_value + 0.5 * lambda_j * l1;
  if (!std::isfinite(col.tau_sq) || col.tau_sq <= options.tau_floor) {
    throw DegenerateColumn(j, col.tau_sq);
  }
  col.theta = col.big_gamma / col.tau_sq;
  col.kkt_residual = r.stationarity;
  col.boundary_active = set.l1_active(r.x);
  col.converged = r.converged;
  col.iterations = r.iterations;
  return col;
}

PrecisionEstimate assemble_precision(const SymmetricMatrix& a, std::span<const double> lambdas,
                                     std::span<const double> budgets,
                                     const NodewiseOptions& options) {
  const auto p = static_cast<std::size_t>(a.dim());
  if (lambdas.size() != p || budgets.size() != p) {
    throw InvalidInput("need one penalty level and one budget per column");
  }
  NodewiseOptions shared = options;
  if (shared.max_step <= 0) shared.max_step = lipschitz_step(a);
  PrecisionEstimate out;
  out.columns.reserve(p);
  out.matrix.resize(a.dim(), a.dim());
  for (std::size_t j = 0; j < p; ++j) {
    out.columns.push_back(nodewise_column(a, j, lambdas[j], budgets[j], shared));
    out.matrix.col(static_cast<Eigen::Index>(j)) = out.columns.back().theta;
  }
  return out;
}

double max_inverse_residual(const SymmetricMatrix& a, const Matrix& theta) {
  if (theta.rows() != a.dim() || theta.cols() != a.dim()) {
    throw InvalidInput("inverse residual: shape mismatch");
  }
  Matrix r = a.matrix().transpose() * theta;
  r.diagonal().array() -= 1.0;
  return r.cwiseAbs().maxCoeff();
}

InverseResidual inverse_residual(const SymmetricMatrix& a, const PrecisionEstimate& theta) {
  InverseResidual out;
  out.max_abs = max_inverse_residual(a, theta.matrix);
  const Matrix& m = a.matrix();
  for (const NodewiseColumn& col : theta.columns) {
    const auto jj = static_cast<Eigen::Index>(col.j);
    Vector prod = m.transpose() * col.big_gamma;
    out.diagonal_gap.push_back(std::abs(prod(jj) - col.tau_sq));
    prod(jj) = 0.0;
    out.offdiag_max.push_back(prod.cwiseAbs().maxCoeff());
  }
  return out;
}

}  // namespace despca
