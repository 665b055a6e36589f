#include "despca/debias.hpp"

#include "despca/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace despca {
namespace {

void check_shapes(const Vector& beta, const Matrix& theta, const SymmetricMatrix& sigma) {
  const Eigen::Index p = sigma.dim();
  if (beta.size() != p || theta.rows() != p || theta.cols() != p) {
    throw InvalidInput("de-biasing: shape mismatch");
  }
}

Vector score(const Vector& beta, const SymmetricMatrix& sigma) {
  return beta.squaredNorm() * beta - sigma.matrix() * beta;
}

double empirical_variance(const Vector& terms) {
  const double mean = terms.mean();
  return (terms.array() - mean).square().mean();
}

}  // namespace

Vector debias_loadings(const Vector& beta_hat, const Matrix& theta,
                       const SymmetricMatrix& sigma_hat) {
  check_shapes(beta_hat, theta, sigma_hat);
  return beta_hat - theta.transpose() * score(beta_hat, sigma_hat);
}

double debias_eigenvalue(const Vector& beta_hat, const Matrix& theta,
                         const SymmetricMatrix& sigma_hat) {
  check_shapes(beta_hat, theta, sigma_hat);
  const Vector correction = theta.transpose() * score(beta_hat, sigma_hat);
  return beta_hat.squaredNorm() - 2.0 * beta_hat.dot(correction);
}

double estimate_sigma_j_sq(const DataMatrix& x, const Vector& beta_hat, const Vector& theta_j) {
  if (beta_hat.size() != x.p() || theta_j.size() != x.p()) {
    throw InvalidInput("variance estimate: shape mismatch");
  }
  const Vector terms = (x.rows() * theta_j).cwiseProduct(x.rows() * beta_hat);
  return empirical_variance(terms);
}

Vector estimate_sigma_sq(const DataMatrix& x, const Vector& beta_hat, const Matrix& theta) {
  if (beta_hat.size() != x.p() || theta.rows() != x.p()) {
    throw InvalidInput("variance estimate: shape mismatch");
  }
  const Vector projected = x.rows() * beta_hat;
  const Matrix terms = (x.rows() * theta).array().colwise() * projected.array();
  const Eigen::RowVectorXd mean = terms.colwise().mean();
  return ((terms.rowwise() - mean).array().square().colwise().mean()).transpose();
}

double estimate_sigma_lambda_sq(const DataMatrix& x, const Vector& beta_hat,
                                const Matrix& theta, bool gaussian_shortcut) {
  if (gaussian_shortcut) {
    const double sq = beta_hat.squaredNorm();
    return 2.0 * sq * sq;
  }
  if (beta_hat.size() != x.p() || theta.rows() != x.p() || theta.cols() != x.p()) {
    throw InvalidInput("variance estimate: shape mismatch");
  }
  const Vector direction = theta * beta_hat;  // Theta beta, so beta^T Theta^T x = x^T Theta beta
  const Vector terms =
      2.0 * (x.rows() * direction).cwiseProduct(x.rows() * beta_hat);
  return empirical_variance(terms);
}

// Acklam's rational approximation, refined by one Halley step on erfc.
double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw InvalidInput("normal quantile needs 0 < p < 1");
  static constexpr std::array<double, 6> a = {-3.969683028665376e+01, 2.209460984245205e+02,
                                              -2.759285104469687e+02, 1.383577518672690e+02,
                                              -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b = {-5.447609879822406e+01, 1.615858368580409e+02,
                                              -1.556989798598866e+02, 6.680131188771972e+01,
                                              -1.328068155288572e+01};
  static constexpr std::array<double, 6> c = {-7.784894002430293e-03, -3.223964580411365e-01,
                                              -2.400758277161838e+00, -2.549732539343734e+00,
                                              4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d = {7.784695709041462e-03, 3.224671290700398e-01,
                                              2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double z;
  if (prob < low) {
    const double q = std::sqrt(-2.0 * std::log(prob));
    z = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (prob <= 1.0 - low) {
    const double q = prob - 0.5;
    const double r = q * q;
    z = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - prob));
    z = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-z / std::numbers::sqrt2) - prob;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * z * z);
  return z - u / (1.0 + 0.5 * z * u);
}

std::vector<Interval> confidence_intervals(const Vector& b_hat, const Vector& sigmas,
                                           std::size_t n, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("confidence level must be in (0, 1)");
  if (sigmas.size() != b_hat.size()) throw InvalidInput("one sigma per coordinate required");
  if (n == 0) throw InvalidInput("sample size must be positive");
  const double z = normal_quantile(0.5 * (1.0 + level));
  const double scale = z / std::sqrt(static_cast<double>(n));
  std::vector<Interval> out(static_cast<std::size_t>(b_hat.size()));
  for (Eigen::Index j = 0; j < b_hat.size(); ++j) {
    const double half = scale * std::max(sigmas(j), 0.0);
    out[static_cast<std::size_t>(j)] = {b_hat(j) - half, b_hat(j) + half};
  }
  return out;
}

std::vector<std::size_t> threshold_support(const Vector& b_hat, double c, std::size_t p,
                                           std::size_t n) {
  if (!(c > 0)) throw InvalidInput("support threshold constant must be positive");
  if (p < 1 || n < 1) throw InvalidInput("threshold needs p, n >= 1");
  const double level = c * std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
  std::vector<std::size_t> support;
  for (Eigen::Index i = 0; i < b_hat.size(); ++i) {
    if (std::abs(b_hat(i)) > level) support.push_back(static_cast<std::size_t>(i));
  }
  return support;
}

Vector classical_pca(const SymmetricMatrix& sigma_hat) {
  const EigenDecomposition top = top_eigenpairs(sigma_hat, 1);
  return std::sqrt(std::max(top.values(0), 0.0)) * top.vectors.col(0);
}

}  // namespace despca
