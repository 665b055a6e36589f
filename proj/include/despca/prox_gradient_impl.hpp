#pragma once

#include "despca/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace despca {

template <class Smooth>
ProxGradientResult minimize_composite(Smooth&& smooth, const FeasibleSet& set, double lambda,
                                      const Vector& start,
                                      const ProxGradientOptions& options) {
  if (lambda < 0) throw InvalidInput("penalty level must be nonnegative");

  ProxGradientResult out;
  Vector x = set.contains(start) ? start : set.prox(start, 0.0);
  Vector grad(x.size());
  double f = smooth(x, grad);
  double objective = f + lambda * x.lpNorm<1>();
  if (!std::isfinite(objective)) throw NumericalError("non-finite objective at start point");
  if (options.record_objective) out.objective_trace.push_back(objective);

  Vector candidate(x.size());
  Vector candidate_grad(x.size());
  double step = options.initial_step;
  double residual = std::numeric_limits<double>::infinity();
  double stationarity = stationarity_residual(set, lambda, x, grad);
  int iter = 0;

  while (iter < options.max_iter) {
    if (residual <= options.tol && stationarity <= options.tol) {
      out.converged = true;
      break;
    }
    ++iter;
    bool accepted = false;
    double candidate_f = 0.0;
    double candidate_objective = 0.0;
    double moved = 0.0;
    for (int bt = 0; bt <= options.max_backtracks; ++bt) {
      candidate = set.prox(x - step * grad, step * lambda);
      moved = (candidate - x).squaredNorm();
      if (moved == 0.0) {
        accepted = true;
        break;
      }
      candidate_f = smooth(candidate, candidate_grad);
      candidate_objective = candidate_f + lambda * candidate.lpNorm<1>();
      if (!std::isfinite(candidate_objective)) {
        step *= options.shrink;
        continue;
      }
      if (candidate_objective <= objective - options.sufficient_decrease * moved / step) {
        accepted = true;
        break;
      }
      // Near a solution the decrease drops below round-off in the objective.
      // Then accept when the change is within that noise and the local
      // gradient Lipschitz estimate is compatible with the step.
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                           (1.0 + std::abs(objective));
      if (candidate_objective <= objective + noise &&
          step * (candidate_grad - grad).norm() <= std::sqrt(moved)) {
        accepted = true;
        break;
      }
      step *= options.shrink;
    }
    if (!accepted) {
      // A shrinking step that never decreases the objective means the
      // gradient is inconsistent with f or the iterate went non-finite.
      if (candidate_objective > objective + 1e-10 * (1.0 + std::abs(objective)) ||
          !std::isfinite(candidate_objective)) {
        throw NumericalError("line search failed to decrease the objective after " +
                             std::to_string(options.max_backtracks) + " halvings (iteration " +
                             std::to_string(iter) + ")");
      }
      residual = 0.0;
      stationarity = stationarity_residual(set, lambda, x, grad);
      out.converged = stationarity <= options.tol;
      break;
    }
    if (moved == 0.0) {
      // exact fixed point in floating point; nothing more to gain
      residual = 0.0;
      stationarity = stationarity_residual(set, lambda, x, grad);
      out.converged = stationarity <= options.tol;
      break;
    }
    residual = std::sqrt(moved) / step;
    x.swap(candidate);
    grad.swap(candidate_grad);
    f = candidate_f;
    objective = candidate_objective;
    if (options.record_objective) out.objective_trace.push_back(objective);
    stationarity = stationarity_residual(set, lambda, x, grad);
    step = std::min(options.initial_step, 2.0 * step);
  }
  if (!out.converged && residual <= options.tol && stationarity <= options.tol) {
    out.converged = true;
  }

  out.x = std::move(x);
  out.grad = std::move(grad);
  out.smooth_value = f;
  out.objective = objective;
  out.fixed_point_residual = residual;
  out.stationarity = stationarity;
  out.iterations = iter;
  return out;
}

}  // namespace despca
