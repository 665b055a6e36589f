#pragma once

#include "despca/linalg.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace despca {

/// Spike strength and direction as given by the user; `direction` need not
/// be unit length. I + omega v v^T is re-expressed as I + (omega ||v||^2) u u^T.
struct Spike {
  double omega = 0.0;
  Vector direction;
};

/// Sigma0 = I + sum_i omega_i u_i u_i^T with orthonormal u_i and
/// omega_1 > omega_2 >= ... > 0 (after normalization).
struct SpikedModel {
  Eigen::Index p = 0;
  std::vector<double> omegas;    // normalized strengths
  std::vector<Vector> spikes;    // unit directions
  SymmetricMatrix sigma0;
  Vector beta0;                  // sqrt(1 + omega_1) u_1, sign-canonical
  SymmetricMatrix theta0;        // inverse Hessian of the population risk at beta0
  Vector eigenvalues;            // of Sigma0, descending
  double rho = 0.0;              // sqrt(Lambda_1) - sqrt(Lambda_2)

  double lambda_max() const { return eigenvalues(0); }
  /// Indices (0-based) where beta0 is nonzero.
  std::vector<Eigen::Index> support() const;
};

struct TrueVariances {
  Vector sigma_j_sq;
  double sigma_lambda_sq = 0.0;
};

SpikedModel build_model(Eigen::Index p, const std::vector<Spike>& spikes);

/// The single-spike models with v = (1,1,1,0,1,0,...,0):
/// model 1 uses omega = 1/5 (Lambda_max = 1.8), model 2 omega = 1 (Lambda_max = 5).
SpikedModel paper_model(int which, Eigen::Index p);

/// Theta0 = U^T D U from the eigendecomposition of Sigma0.
SymmetricMatrix theta0_closed_form(const SpikedModel& model);

/// Theta0 = sum_{i<=r} (D_ii - 1/omega_1) u_i u_i^T + I / omega_1.
SymmetricMatrix theta0_spiked_shortcut(const SpikedModel& model);

/// Gaussian asymptotic variances of the de-biased loadings and eigenvalue.
TrueVariances true_variances(const SpikedModel& model);

/// Standard normals by Box-Muller on a std::mt19937_64 stream. Each
/// engine draw u gives (u >> 11) * 2^-53; pairs (u1, u2) map to
/// sqrt(-2 log(1 - u1)) * (cos, sin)(2 pi u2), cosine first.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}
  double next();

 private:
  double uniform();

  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// n rows L z with L L^T = Sigma (Cholesky); z filled row by row from a
/// GaussianStream seeded with `seed`.
DataMatrix sample_gaussian(const SymmetricMatrix& sigma, Eigen::Index n, std::uint64_t seed);
DataMatrix sample_gaussian(const SpikedModel& model, Eigen::Index n, std::uint64_t seed);

}  // namespace despca
