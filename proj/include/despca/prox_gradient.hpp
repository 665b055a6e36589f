#pragma once

// Projected proximal-gradient engine for
//
//   min f(x) + lambda * ||x||_1   s.t.  ||x||_1 <= budget,  ||x - center||_2 <= radius
//
// with f smooth (possibly non-convex). Shared by the second-step loadings
// solver and the nodewise Lasso.

#include "despca/linalg.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace despca {

class FeasibleSet {
 public:
  FeasibleSet() = default;
  FeasibleSet(double l1_budget, std::optional<Vector> center, double radius);

  double l1_budget() const noexcept { return l1_budget_; }
  const std::optional<Vector>& center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }

  /// argmin_x 0.5 ||x - v||^2 + threshold ||x||_1 over the set. The l1 part
  /// is closed form; with the ball, a bisection on the ball multiplier gives
  /// the exact prox. Only if the l1 budget is then violated too does it fall
  /// back to Dykstra-type alternation (at most 50 rounds) and a radial pull
  /// toward the center.
  Vector prox(const Vector& v, double threshold) const;

  bool contains(const Vector& x, double slack = 1e-8) const;
  bool l1_active(const Vector& x, double slack = 1e-9) const;
  bool l2_active(const Vector& x, double slack = 1e-9) const;

 private:
  Vector prox_l1_part(const Vector& v, double threshold) const;

  double l1_budget_ = std::numeric_limits<double>::infinity();
  std::optional<Vector> center_;
  double radius_ = std::numeric_limits<double>::infinity();
};

/// Stationarity residual of x for the composite problem given grad f(x).
/// Interior points: infinity norm of the minimum-norm element of
/// grad + lambda * subdiff ||x||_1. Boundary points: infinity norm of the
/// unit-step gradient mapping x - prox(x - grad).
double stationarity_residual(const FeasibleSet& set, double lambda, const Vector& x,
                             const Vector& grad);

struct ProxGradientOptions {
  int max_iter = 5000;
  double tol = 1e-8;
  double initial_step = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  int max_backtracks = 80;
  bool record_objective = false;
};

struct ProxGradientResult {
  Vector x;
  Vector grad;
  double smooth_value = 0.0;
  double objective = 0.0;
  double fixed_point_residual = 0.0;
  double stationarity = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

/// `smooth(x, grad)` returns f(x) and writes grad f(x).
template <class Smooth>
ProxGradientResult minimize_composite(Smooth&& smooth, const FeasibleSet& set, double lambda,
                                      const Vector& start,
                                      const ProxGradientOptions& options = {});

}  // namespace despca

#include "despca/prox_gradient_impl.hpp"
