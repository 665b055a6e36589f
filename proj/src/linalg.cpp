#include "despca/linalg.hpp"

#include "despca/error.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <string>
#include <vector>

extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace despca {
namespace {

// Replications are parallelized by the caller; BLAS runs single-threaded so
// results do not depend on the thread layout.
void pin_blas_threads() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (openblas_set_num_threads != nullptr) openblas_set_num_threads(1);
  });
}

bool all_finite(const Matrix& a) { return a.allFinite(); }

// Sorts eigenpairs descending (stable in the original index on ties) and
// canonicalizes each vector's sign.
EigenDecomposition finalize(const Vector& values, const Matrix& vectors) {
  const Eigen::Index k = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return values(a) > values(b);
  });
  EigenDecomposition out;
  out.values.resize(k);
  out.vectors.resize(vectors.rows(), k);
  for (Eigen::Index i = 0; i < k; ++i) {
    out.values(i) = values(order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
    canonicalize_sign(out.vectors.col(i));
  }
  return out;
}

EigenDecomposition run_dsyevr(const SymmetricMatrix& a, Eigen::Index k) {
  pin_blas_threads();
  const auto p = static_cast<lapack_int>(a.dim());
  if (p == 0) return {};
  Matrix work = a.matrix();
  Vector w(p);
  Matrix z(p, std::max<Eigen::Index>(k, 1));
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(p));
  lapack_int found = 0;
  const bool all = k >= p;
  const lapack_int il = all ? 1 : p - static_cast<lapack_int>(k) + 1;
  const lapack_int info =
      LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', all ? 'A' : 'I', 'L', p, work.data(), p, 0.0,
                     0.0, il, p, 0.0, &found, w.data(), z.data(), p, isuppz.data());
  if (info != 0) {
    throw NumericalError("symmetric eigensolver failed (LAPACK dsyevr info = " +
                         std::to_string(info) + ", dimension " + std::to_string(p) + ")");
  }
  return finalize(w.head(found), z.leftCols(found));
}

}  // namespace

DataMatrix::DataMatrix(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 1) throw InvalidInput("data matrix needs at least one observation");
  if (rows_.cols() < 2) throw InvalidInput("data matrix needs dimension p >= 2");
  if (!all_finite(rows_)) throw InvalidInput("data matrix contains non-finite entries");
}

SymmetricMatrix::SymmetricMatrix(const Matrix& a) {
  if (a.rows() != a.cols()) throw InvalidInput("symmetric matrix must be square");
  if (!all_finite(a)) throw InvalidInput("symmetric matrix contains non-finite entries");
  data_ = 0.5 * (a + a.transpose());
}

SymmetricMatrix SymmetricMatrix::identity(Eigen::Index p) {
  return SymmetricMatrix(Matrix::Identity(p, p));
}

SymmetricMatrix SymmetricMatrix::zero(Eigen::Index p) {
  return SymmetricMatrix(Matrix::Zero(p, p));
}

SymmetricMatrix sample_covariance(const DataMatrix& x) {
  const Eigen::Index p = x.p();
  Matrix s = Matrix::Zero(p, p);
  s.selfadjointView<Eigen::Lower>().rankUpdate(x.rows().transpose(),
                                               1.0 / static_cast<double>(x.n()));
  s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
  return SymmetricMatrix(s);
}

SymmetricMatrix centered_sample_covariance(const DataMatrix& x) {
  Matrix centered = x.rows().rowwise() - x.rows().colwise().mean();
  return sample_covariance(DataMatrix(std::move(centered)));
}

EigenDecomposition symmetric_eigen(const SymmetricMatrix& a) {
  return run_dsyevr(a, a.dim());
}

EigenDecomposition top_eigenpairs(const SymmetricMatrix& a, Eigen::Index k) {
  if (k < 1) throw InvalidInput("top_eigenpairs needs k >= 1");
  const Eigen::Index p = a.dim();
  if (2 * k >= p) {
    EigenDecomposition full = run_dsyevr(a, p);
    return {full.values.head(std::min(k, p)), full.vectors.leftCols(std::min(k, p))};
  }
  // One extra pair detects a tie at the cutoff, where the subset solver's
  // choice of basis would differ from the full decomposition's ordering.
  EigenDecomposition part = run_dsyevr(a, k + 1);
  const double scale = std::max(1.0, std::abs(part.values(0)));
  if (part.values(k - 1) - part.values(k) <= 1e-12 * scale) {
    part = run_dsyevr(a, p);
  }
  return {part.values.head(k), part.vectors.leftCols(k)};
}

void canonicalize_sign(Eigen::Ref<Vector> v) {
  if (v.size() == 0) return;
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double m = std::abs(v(i));
    if (m > best) {
      best = m;
      arg = i;
    }
  }
  if (v(arg) < 0) v = -v;
}

Vector project_l1_ball(const Vector& v, double radius) {
  if (!(radius > 0)) throw InvalidInput("l1 ball radius must be positive");
  if (!v.allFinite()) throw InvalidInput("project_l1_ball: non-finite input");
  if (v.lpNorm<1>() <= radius) return v;

  std::vector<double> mags(v.data(), v.data() + v.size());
  for (double& m : mags) m = std::abs(m);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < mags.size(); ++j) {
    cumulative += mags[j];
    const double candidate = (cumulative - radius) / static_cast<double>(j + 1);
    if (mags[j] - candidate > 0) theta = candidate;
  }
  return soft_threshold(v, theta);
}

Vector project_l2_ball(const Vector& v, const Vector& center, double radius) {
  if (!(radius > 0)) throw InvalidInput("l2 ball radius must be positive");
  const Vector d = v - center;
  const double dist = d.norm();
  if (dist <= radius) return v;
  return center + (radius / dist) * d;
}

Vector soft_threshold(const Vector& v, double t) {
  if (t < 0) throw InvalidInput("soft threshold level must be nonnegative");
  return (v.array().sign() * (v.array().abs() - t).max(0.0)).matrix();
}

Matrix soft_threshold(const Matrix& a, double t) {
  if (t < 0) throw InvalidInput("soft threshold level must be nonnegative");
  return (a.array().sign() * (a.array().abs() - t).max(0.0)).matrix();
}

Vector project_capped_simplex(const Vector& gamma) {
  if (gamma.size() == 0) throw InvalidInput("capped simplex projection of empty vector");
  auto mass = [&](double theta) {
    return (gamma.array() - theta).max(0.0).min(1.0).sum();
  };
  double lo = gamma.minCoeff() - 1.0;  // mass(lo) = size >= 1
  double hi = gamma.maxCoeff();        // mass(hi) = 0
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) >= 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double theta = 0.5 * (lo + hi);

  // Solve exactly on the free set identified by bisection.
  double free_sum = 0.0;
  Eigen::Index free_count = 0;
  Eigen::Index capped = 0;
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    const double g = gamma(i) - theta;
    if (g >= 1.0) {
      ++capped;
    } else if (g > 0.0) {
      free_sum += gamma(i);
      ++free_count;
    }
  }
  if (free_count > 0) {
    const double exact = (free_sum + static_cast<double>(capped) - 1.0) /
                         static_cast<double>(free_count);
    if (std::abs(exact - theta) <= 1e-9) theta = exact;
  }
  return (gamma.array() - theta).max(0.0).min(1.0).matrix();
}

SymmetricMatrix project_fantope(const SymmetricMatrix& a) {
  const Eigen::Index p = a.dim();
  // Only eigenvalues above the shift survive; grow the partial
  // decomposition until the smallest computed one falls below it.
  Eigen::Index k = std::min<Eigen::Index>(p, 8);
  while (true) {
    const EigenDecomposition top = top_eigenpairs(a, k);
    const Vector capped = project_capped_simplex(top.values);
    const bool complete = k == p || capped(k - 1) == 0.0;
    if (complete) {
      Eigen::Index used = 0;
      while (used < k && capped(used) > 0.0) ++used;
      const auto v = top.vectors.leftCols(used);
      return SymmetricMatrix(v * capped.head(used).asDiagonal() * v.transpose());
    }
    k = std::min(p, 2 * k);
  }
}

}  // namespace despca
