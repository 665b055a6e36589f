#pragma once

#include "despca/linalg.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>

// Test-side randomness is std::normal_distribution, kept apart from the
// library's own generator so oracles never share a code path with it.
namespace testing_support {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = z(rng);
  }
  return m;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index p) {
  return random_matrix(rng, p, 1).col(0);
}

inline despca::SymmetricMatrix random_symmetric(std::mt19937_64& rng, Eigen::Index p) {
  const Eigen::MatrixXd b = random_matrix(rng, p, p);
  return despca::SymmetricMatrix(Eigen::MatrixXd(b + b.transpose()));
}

// B^T B / m + shift I: positive definite with condition number bounded by the shift.
inline despca::SymmetricMatrix random_pd(std::mt19937_64& rng, Eigen::Index p, double shift) {
  const Eigen::MatrixXd b = random_matrix(rng, p + 3, p);
  return despca::SymmetricMatrix(Eigen::MatrixXd(b.transpose() * b / static_cast<double>(p + 3) +
                                                 shift * Eigen::MatrixXd::Identity(p, p)));
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// distance between v and w up to a global sign
inline double sign_free_distance(const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
  return std::min((v - w).norm(), (v + w).norm());
}

}  // namespace testing_support
