#pragma once

#include "despca/linalg.hpp"

#include <cstddef>
#include <vector>

namespace despca {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct InferenceResult {
  Vector b_hat;
  double lambda_hat = 0.0;
  Vector sigma_j_sq_hat;
  double sigma_lambda_sq_hat = 0.0;
  std::vector<Interval> intervals;
  Interval lambda_interval;
  double level = 0.95;
  std::vector<std::size_t> support;  // 0-based
};

/// b = beta - Theta^T (||beta||^2 beta - Sigma_hat beta)
Vector debias_loadings(const Vector& beta_hat, const Matrix& theta,
                       const SymmetricMatrix& sigma_hat);

/// ||beta||^2 - 2 beta^T Theta^T (||beta||^2 beta - Sigma_hat beta)
double debias_eigenvalue(const Vector& beta_hat, const Matrix& theta,
                         const SymmetricMatrix& sigma_hat);

/// Empirical variance over observations of theta_j^T x_i x_i^T beta.
double estimate_sigma_j_sq(const DataMatrix& x, const Vector& beta_hat, const Vector& theta_j);

/// All p coordinates at once; column j of `theta` plays theta_j.
Vector estimate_sigma_sq(const DataMatrix& x, const Vector& beta_hat, const Matrix& theta);

/// Gaussian shortcut 2 ||beta||^4, otherwise the empirical variance of
/// 2 beta^T Theta^T x_i x_i^T beta.
double estimate_sigma_lambda_sq(const DataMatrix& x, const Vector& beta_hat,
                                const Matrix& theta, bool gaussian_shortcut);

/// Standard-normal quantile (rational approximation plus one Halley step).
double normal_quantile(double prob);

/// b_j +/- z_{(1+level)/2} sigma_j / sqrt(n); `sigmas` are standard deviations.
std::vector<Interval> confidence_intervals(const Vector& b_hat, const Vector& sigmas,
                                           std::size_t n, double level);

/// {i : |b_i| > C sqrt(log p / n)}
std::vector<std::size_t> threshold_support(const Vector& b_hat, double c, std::size_t p,
                                           std::size_t n);

/// Top eigenvector of Sigma_hat scaled to squared norm Lambda_max(Sigma_hat).
Vector classical_pca(const SymmetricMatrix& sigma_hat);

}  // namespace despca
