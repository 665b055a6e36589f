#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace despca {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// n observations in R^p stored row-wise. Entries are finite, n >= 1, p >= 2.
class DataMatrix {
 public:
  explicit DataMatrix(Matrix rows);

  Eigen::Index n() const noexcept { return rows_.rows(); }
  Eigen::Index p() const noexcept { return rows_.cols(); }
  const Matrix& rows() const noexcept { return rows_; }

 private:
  Matrix rows_;
};

/// Dense symmetric matrix. Construction symmetrizes as (A + A^T) / 2, so
/// entry (i, j) and (j, i) are bit-identical afterwards.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(const Matrix& a);

  static SymmetricMatrix identity(Eigen::Index p);
  static SymmetricMatrix zero(Eigen::Index p);

  Eigen::Index dim() const noexcept { return data_.rows(); }
  const Matrix& matrix() const noexcept { return data_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return data_(i, j); }

 private:
  Matrix data_;
};

/// Eigenpairs sorted by non-increasing value; columns of `vectors` are
/// orthonormal and sign-canonicalized (largest-magnitude entry positive).
struct EigenDecomposition {
  Vector values;
  Matrix vectors;
};

/// (1/n) X^T X without centering.
SymmetricMatrix sample_covariance(const DataMatrix& x);

/// Same, after subtracting column means (optional path for real data).
SymmetricMatrix centered_sample_covariance(const DataMatrix& x);

EigenDecomposition symmetric_eigen(const SymmetricMatrix& a);

/// The k largest eigenpairs, in the same conventions as symmetric_eigen.
EigenDecomposition top_eigenpairs(const SymmetricMatrix& a, Eigen::Index k);

/// Flip v so its largest-magnitude entry (first one on ties) is positive.
void canonicalize_sign(Eigen::Ref<Vector> v);

/// Euclidean projection onto {w : ||w||_1 <= radius}.
Vector project_l1_ball(const Vector& v, double radius);

/// Euclidean projection onto {w : ||w - center||_2 <= radius}.
Vector project_l2_ball(const Vector& v, const Vector& center, double radius);

Vector soft_threshold(const Vector& v, double t);
Matrix soft_threshold(const Matrix& a, double t);

/// Projection of gamma onto {g in [0,1]^p : sum g = 1}.
Vector project_capped_simplex(const Vector& gamma);

/// Euclidean projection onto the Fantope {Z : tr Z = 1, 0 <= Z <= I}.
SymmetricMatrix project_fantope(const SymmetricMatrix& a);

}  // namespace despca
