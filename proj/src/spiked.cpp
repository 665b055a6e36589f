#include "despca/spiked.hpp"

#include "despca/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace despca {

std::vector<Eigen::Index> SpikedModel::support() const {
  std::vector<Eigen::Index> s;
  for (Eigen::Index i = 0; i < beta0.size(); ++i) {
    if (std::abs(beta0(i)) > 1e-12) s.push_back(i);
  }
  return s;
}

SpikedModel build_model(Eigen::Index p, const std::vector<Spike>& spikes) {
  if (p < 2) throw InvalidInput("spiked model needs p >= 2");
  if (spikes.empty()) throw InvalidInput("spiked model needs at least one spike");

  SpikedModel m;
  m.p = p;
  for (const Spike& s : spikes) {
    if (s.direction.size() != p) throw InvalidInput("spike direction has wrong dimension");
    const double norm = s.direction.norm();
    if (!(norm > 0) || !s.direction.allFinite()) {
      throw InvalidInput("spike direction must be a nonzero finite vector");
    }
    const double omega = s.omega * norm * norm;
    if (!(omega > 0) || !std::isfinite(omega)) {
      throw InvalidInput("spike strengths must be positive (no eigenvalue gap otherwise)");
    }
    m.omegas.push_back(omega);
    m.spikes.push_back(s.direction / norm);
  }
  for (std::size_t i = 0; i < m.spikes.size(); ++i) {
    for (std::size_t k = i + 1; k < m.spikes.size(); ++k) {
      if (std::abs(m.spikes[i].dot(m.spikes[k])) > 1e-10) {
        throw InvalidInput("spike directions " + std::to_string(i) + " and " +
                           std::to_string(k) + " are not orthogonal");
      }
    }
  }
  for (std::size_t i = 1; i < m.omegas.size(); ++i) {
    if (i == 1 && !(m.omegas[0] > m.omegas[1])) {
      throw InvalidInput("the leading spike must be strictly the largest");
    }
    if (m.omegas[i] > m.omegas[i - 1]) {
      throw InvalidInput("spikes must be ordered by decreasing strength");
    }
  }

  Matrix sigma = Matrix::Identity(p, p);
  for (std::size_t i = 0; i < m.spikes.size(); ++i) {
    sigma.noalias() += m.omegas[i] * m.spikes[i] * m.spikes[i].transpose();
  }
  m.sigma0 = SymmetricMatrix(sigma);
  m.beta0 = std::sqrt(1.0 + m.omegas[0]) * m.spikes[0];
  canonicalize_sign(m.beta0);
  m.eigenvalues = symmetric_eigen(m.sigma0).values;
  m.rho = std::sqrt(m.eigenvalues(0)) - std::sqrt(m.eigenvalues(1));
  m.theta0 = theta0_closed_form(m);
  return m;
}

SpikedModel paper_model(int which, Eigen::Index p) {
  if (which != 1 && which != 2) throw InvalidInput("model must be 1 or 2");
  if (p < 5) throw InvalidInput("models 1 and 2 need p >= 5");
  Vector v = Vector::Zero(p);
  v(0) = v(1) = v(2) = v(4) = 1.0;
  return build_model(p, {Spike{which == 1 ? 0.2 : 1.0, v}});
}

SymmetricMatrix theta0_closed_form(const SpikedModel& model) {
  const EigenDecomposition eig = symmetric_eigen(model.sigma0);
  const double top = model.beta0.squaredNorm();
  if (eig.values(0) - eig.values(1) <= 1e-12) {
    throw DegenerateGap("no gap between the two largest eigenvalues of Sigma0");
  }
  Vector d(model.p);
  d(0) = 1.0 / (2.0 * top);
  for (Eigen::Index i = 1; i < model.p; ++i) d(i) = 1.0 / (top - eig.values(i));
  return SymmetricMatrix(eig.vectors * d.asDiagonal() * eig.vectors.transpose());
}

SymmetricMatrix theta0_spiked_shortcut(const SpikedModel& model) {
  const double w1 = model.omegas[0];
  Matrix theta = Matrix::Identity(model.p, model.p) / w1;
  for (std::size_t i = 0; i < model.spikes.size(); ++i) {
    const double dii = i == 0 ? 1.0 / (2.0 * (1.0 + w1)) : 1.0 / (w1 - model.omegas[i]);
    theta.noalias() += (dii - 1.0 / w1) * model.spikes[i] * model.spikes[i].transpose();
  }
  return SymmetricMatrix(theta);
}

TrueVariances true_variances(const SpikedModel& model) {
  const Matrix& theta = model.theta0.matrix();
  const double sq = model.beta0.squaredNorm();
  TrueVariances out;
  const Matrix sandwich = theta.transpose() * model.sigma0.matrix() * theta;
  const Vector projection = theta.transpose() * model.beta0;
  out.sigma_j_sq = sandwich.diagonal() * (sq * sq) + (sq * projection).array().square().matrix();
  out.sigma_lambda_sq = 2.0 * model.lambda_max() * model.lambda_max();
  return out;
}

double GaussianStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double GaussianStream::next() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(angle);
  has_cached_ = true;
  return r * std::cos(angle);
}

DataMatrix sample_gaussian(const SymmetricMatrix& sigma, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw InvalidInput("need at least one sample");
  const Eigen::Index p = sigma.dim();
  // Right factor R with R^T R = Sigma, so that rows z_i^T R have covariance Sigma.
  Matrix factor;
  const Eigen::LLT<Matrix> llt(sigma.matrix());
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixU();
  } else {
    const EigenDecomposition eig = symmetric_eigen(sigma);
    const double scale = std::max(1.0, std::abs(eig.values(0)));
    if (eig.values(p - 1) < -1e-12 * scale) {
      throw InvalidInput("covariance is not positive semi-definite; cannot sample");
    }
    factor = eig.values.cwiseMax(0.0).cwiseSqrt().asDiagonal() * eig.vectors.transpose();
  }
  GaussianStream stream(seed);
  Matrix z(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) z(i, j) = stream.next();
  }
  Matrix x = z * factor;
  return DataMatrix(std::move(x));
}

DataMatrix sample_gaussian(const SpikedModel& model, Eigen::Index n, std::uint64_t seed) {
  return sample_gaussian(model.sigma0, n, seed);
}

}  // namespace despca
