#include "despca/prox_gradient.hpp"

#include "despca/error.hpp"

namespace despca {

FeasibleSet::FeasibleSet(double l1_budget, std::optional<Vector> center, double radius)
    : l1_budget_(l1_budget), center_(std::move(center)), radius_(radius) {
  if (!(l1_budget_ > 0)) throw InvalidInput("l1 budget must be positive");
  if (center_) {
    if (!(radius_ > 0)) throw InvalidInput("locality radius must be positive");
    if (!center_->allFinite()) throw InvalidInput("locality center must be finite");
    if (center_->lpNorm<1>() > l1_budget_) {
      throw InvalidInput("locality center violates the l1 budget");
    }
  }
}

Vector FeasibleSet::prox_l1_part(const Vector& v, double threshold) const {
  Vector shrunk = soft_threshold(v, threshold);
  if (std::isfinite(l1_budget_) && shrunk.lpNorm<1>() > l1_budget_) {
    return project_l1_ball(shrunk, l1_budget_);
  }
  return shrunk;
}

Vector FeasibleSet::prox(const Vector& v, double threshold) const {
  Vector y = prox_l1_part(v, threshold);
  if (!center_) return y;
  const Vector& c = *center_;
  if ((y - c).norm() <= radius_) return y;

  // Exact prox of threshold*||.||_1 + ball indicator: with multiplier mu on
  // the ball, x(mu) = soft((v + mu c) / (1 + mu), threshold / (1 + mu)) and
  // ||x(mu) - c|| is nonincreasing in mu.
  auto at = [&](double mu) {
    return soft_threshold(Vector((v + mu * c) / (1.0 + mu)), threshold / (1.0 + mu));
  };
  double lo = 0.0;
  double hi = 1.0;
  Vector x = at(hi);
  for (int it = 0; it < 200 && (x - c).norm() > radius_; ++it) {
    lo = hi;
    hi *= 2.0;
    x = at(hi);
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    Vector trial = at(mid);
    if ((trial - c).norm() > radius_) {
      lo = mid;
    } else {
      hi = mid;
      x.swap(trial);
    }
  }
  if ((x - c).norm() > radius_) x = project_l2_ball(x, c, radius_);
  if (!std::isfinite(l1_budget_) || x.lpNorm<1>() <= l1_budget_) return x;

  // Both constraints matter: Dykstra-like alternation between the two proxes.
  x = v;
  Vector p = Vector::Zero(v.size());
  Vector q = Vector::Zero(v.size());
  for (int round = 0; round < 50; ++round) {
    y = prox_l1_part(x + p, threshold);
    p = x + p - y;
    Vector next = project_l2_ball(y + q, c, radius_);
    q = y + q - next;
    const double shift = (next - x).norm();
    x.swap(next);
    if (shift <= 1e-12 * (1.0 + x.norm())) break;
  }

  if (std::isfinite(l1_budget_) && x.lpNorm<1>() > l1_budget_) {
    // Pull radially toward the center (feasible) until inside the budget.
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((c + mid * (x - c)).lpNorm<1>() <= l1_budget_) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    x = c + lo * (x - c);
  }
  return x;
}

bool FeasibleSet::contains(const Vector& x, double slack) const {
  if (x.lpNorm<1>() > l1_budget_ + slack) return false;
  if (center_ && (x - *center_).norm() > radius_ + slack) return false;
  return true;
}

bool FeasibleSet::l1_active(const Vector& x, double slack) const {
  return std::isfinite(l1_budget_) && x.lpNorm<1>() >= l1_budget_ - slack;
}

bool FeasibleSet::l2_active(const Vector& x, double slack) const {
  return center_.has_value() && (x - *center_).norm() >= radius_ - slack;
}

double stationarity_residual(const FeasibleSet& set, double lambda, const Vector& x,
                             const Vector& grad) {
  if (set.l1_active(x) || set.l2_active(x)) {
    return (x - set.prox(x - grad, lambda)).lpNorm<Eigen::Infinity>();
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double r;
    if (x(i) > 0) {
      r = std::abs(grad(i) + lambda);
    } else if (x(i) < 0) {
      r = std::abs(grad(i) - lambda);
    } else {
      r = std::max(std::abs(grad(i)) - lambda, 0.0);
    }
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace despca
