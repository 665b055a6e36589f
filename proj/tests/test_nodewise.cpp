#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "despca/error.hpp"
#include "despca/fantope.hpp"
#include "despca/mstep.hpp"
#include "despca/nodewise.hpp"
#include "despca/spiked.hpp"
#include "helpers.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <vector>

using namespace despca;
using namespace testing_support;

namespace {

std::vector<double> constant(Eigen::Index p, double v) {
  return std::vector<double>(static_cast<std::size_t>(p), v);
}

// empirical Hessian at the second-step estimate for one seeded dataset
SymmetricMatrix sample_hessian(int which, Eigen::Index p, Eigen::Index n, std::uint64_t seed) {
  const SpikedModel m = paper_model(which, p);
  const SymmetricMatrix s = sample_covariance(sample_gaussian(m, n, seed));
  const double lambda = std::sqrt(std::log(double(p)) / double(n));
  const InitialEstimate init = extract_initial(solve_fantope(s, lambda), s);
  const RiskProblem problem{s, lambda, default_l1_budget(init.beta_init), default_radius(s),
                            init.beta_init};
  const LoadingsEstimate est = solve_second_step(problem, init.beta_init);
  return risk_hessian(s, est.beta);
}

}  // namespace

TEST_CASE("identity decouples every column") {
  for (std::size_t j = 0; j < 4; ++j) {
    const NodewiseColumn col = nodewise_column(SymmetricMatrix::identity(4), j, 0.1, 10.0);
    CHECK(col.gamma.norm() == 0.0);
    CHECK(col.tau_sq == doctest::Approx(1.0));
    Eigen::VectorXd e = Eigen::VectorXd::Zero(4);
    e(static_cast<Eigen::Index>(j)) = 1.0;
    CHECK(max_abs(col.theta - e) <= 1e-15);
    CHECK(col.big_gamma(static_cast<Eigen::Index>(j)) == 1.0);
  }
}

TEST_CASE("diagonal matrix gives e_j / a_j") {
  Eigen::VectorXd d(4);
  d << 2.0, 0.5, 3.0, 1.25;
  const SymmetricMatrix a(Eigen::MatrixXd(d.asDiagonal()));
  const PrecisionEstimate est = assemble_precision(a, constant(4, 0.1), constant(4, 10.0));
  CHECK(max_abs(est.matrix - Eigen::MatrixXd(d.cwiseInverse().asDiagonal())) <= 1e-14);
}

TEST_CASE("assembling the identity returns the identity") {
  const PrecisionEstimate est =
      assemble_precision(SymmetricMatrix::identity(6), constant(6, 0.2), constant(6, 5.0));
  CHECK(max_abs(est.matrix - Eigen::MatrixXd::Identity(6, 6)) == 0.0);
}

TEST_CASE("3x3 positive definite matrix with a tiny penalty") {
  Eigen::Matrix3d m;
  m << 4.0, 1.0, 0.5, 1.0, 3.0, -0.7, 0.5, -0.7, 2.0;
  const SymmetricMatrix a{Eigen::MatrixXd(m)};
  const Eigen::Matrix3d inv = m.inverse();
  for (std::size_t j = 0; j < 3; ++j) {
    const NodewiseColumn col = nodewise_column(a, j, 1e-6, 1e6);
    CHECK(col.converged);
    CHECK(max_abs(col.theta - inv.col(static_cast<Eigen::Index>(j))) <= 1e-3);
  }
}

TEST_CASE("5x5 positive definite matrices against direct inversion") {
  std::mt19937_64 rng(51);
  for (int rep = 0; rep < 10; ++rep) {
    const SymmetricMatrix a = random_pd(rng, 5, 0.3);
    const PrecisionEstimate est = assemble_precision(a, constant(5, 1e-6), constant(5, 1e6));
    const Eigen::MatrixXd inv = a.matrix().fullPivLu().inverse();
    CHECK(max_abs(est.matrix - inv) <= 1e-3);
  }
}

TEST_CASE("column records are consistent") {
  std::mt19937_64 rng(52);
  const SymmetricMatrix a = random_pd(rng, 8, 0.2);
  const PrecisionEstimate est = assemble_precision(a, constant(8, 0.05), constant(8, 50.0));
  REQUIRE(est.columns.size() == 8);
  for (std::size_t k = 0; k < 8; ++k) {
    const NodewiseColumn& col = est.columns[k];
    const auto j = static_cast<Eigen::Index>(k);
    CHECK(col.j == k);
    CHECK(col.tau_sq > 0.0);
    CHECK(col.big_gamma(j) == 1.0);
    CHECK(col.gamma.size() == 7);
    for (Eigen::Index i = 0, g = 0; i < 8; ++i) {
      if (i == j) continue;
      CHECK(col.big_gamma(i) == -col.gamma(g++));
    }
    CHECK(max_abs(col.theta - col.big_gamma / col.tau_sq) <= 1e-12);
    CHECK(max_abs(est.matrix.col(j) - col.theta) == 0.0);
    const double tau = col.big_gamma.dot(a.matrix() * col.big_gamma) + 0.5 * 0.05 * col.gamma.lpNorm<1>();
    CHECK(col.tau_sq == doctest::Approx(tau).epsilon(1e-12));
  }
}

TEST_CASE("inverse residual examples") {
  std::mt19937_64 rng(53);
  const SymmetricMatrix a = random_pd(rng, 4, 0.5);
  CHECK(max_inverse_residual(a, a.matrix().inverse()) <= 1e-10);
  CHECK(max_inverse_residual(a, Eigen::MatrixXd::Zero(4, 4)) == 1.0);
}

TEST_CASE("KKT identities on interior columns of random PD matrices") {
  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> unif(0.01, 0.5);
  NodewiseOptions opt;
  int interior = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index p = 3 + rep;
    const SymmetricMatrix a = random_pd(rng, p, 0.2);
    std::vector<double> lambdas(static_cast<std::size_t>(p));
    for (double& l : lambdas) l = unif(rng);
    const PrecisionEstimate est = assemble_precision(a, lambdas, constant(p, 1e3), opt);
    const InverseResidual res = inverse_residual(a, est);
    for (const NodewiseColumn& col : est.columns) {
      if (!col.converged || col.boundary_active) continue;
      ++interior;
      const auto j = static_cast<Eigen::Index>(col.j);
      Eigen::VectorXd prod = a.matrix().transpose() * col.big_gamma;
      CHECK(std::abs(prod(j) - col.tau_sq) <= 10 * opt.tol);
      prod(j) = 0.0;
      CHECK(prod.cwiseAbs().maxCoeff() <= lambdas[col.j] / 2 + 10 * opt.tol);
      CHECK(res.diagonal_gap[col.j] <= 10 * opt.tol);
      CHECK(res.offdiag_max[col.j] <= lambdas[col.j] / 2 + 10 * opt.tol);
      CHECK(col.kkt_residual <= opt.tol);
    }
  }
  CHECK(interior > 100);
}

TEST_CASE("error to the inverse shrinks as the penalty goes to zero") {
  std::mt19937_64 rng(55);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index p = 2 + rep % 7;
    const SymmetricMatrix a = random_pd(rng, p, 0.3);
    const Eigen::MatrixXd inv = a.matrix().fullPivLu().inverse();
    for (std::size_t j = 0; j < static_cast<std::size_t>(p); ++j) {
      double previous = 1e300;
      for (double lambda : {1e-2, 1e-4, 1e-6}) {
        const NodewiseColumn col = nodewise_column(a, j, lambda, 1e6);
        const double err = (col.theta - inv.col(static_cast<Eigen::Index>(j))).norm();
        CHECK(err <= previous);
        previous = err;
      }
    }
  }
}

TEST_CASE("larger penalty never grows gamma") {
  std::mt19937_64 rng(56);
  for (int rep = 0; rep < 10; ++rep) {
    const SymmetricMatrix a = random_pd(rng, 10, 0.5);
    for (std::size_t j = 0; j < 10; j += 3) {
      double previous = 1e300;
      for (double lambda : {0.01, 0.05, 0.2, 0.8}) {
        const NodewiseColumn col = nodewise_column(a, j, lambda, 1e3);
        CHECK(col.gamma.lpNorm<1>() <= previous + 1e-8);
        previous = col.gamma.lpNorm<1>();
      }
    }
  }
}

TEST_CASE("Model 2 empirical Hessian is inverted up to the KKT bound") {
  const Eigen::Index p = 200, n = 200;
  const SymmetricMatrix a = sample_hessian(2, p, n, 7);
  const double lambda = std::sqrt(std::log(double(p)) / double(n));
  NodewiseOptions opt;
  const PrecisionEstimate est = assemble_precision(a, constant(p, lambda), constant(p, 2 * std::sqrt(double(p))), opt);
  double bound = 0.0;
  for (const NodewiseColumn& col : est.columns) {
    CHECK(col.converged);
    CHECK_FALSE(col.boundary_active);
    bound = std::max(bound, lambda / col.tau_sq);
  }
  CHECK(inverse_residual(a, est).max_abs <= bound + opt.tol);
}

TEST_CASE("indefinite Hessians end in a finite certificate or an explicit failure") {
  int negative = 0, degenerate = 0, finished = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Eigen::Index p = 40;
    const SymmetricMatrix a = sample_hessian(1, p, 160, seed);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.matrix());
    if (es.eigenvalues().minCoeff() < 0) ++negative;
    const double lambda = std::sqrt(std::log(double(p)) / 160.0);
    NodewiseOptions opt;
    for (std::size_t j = 0; j < static_cast<std::size_t>(p); ++j) {
      try {
        const NodewiseColumn col = nodewise_column(a, j, lambda, 2 * std::sqrt(double(p)), opt);
        CHECK(std::isfinite(col.kkt_residual));
        CHECK(col.theta.allFinite());
        CHECK((!col.converged || col.kkt_residual <= opt.tol));
        ++finished;
      } catch (const DegenerateColumn& e) {
        CHECK(e.column() == j);
        CHECK(std::isfinite(e.tau_sq()));
        CHECK(e.tau_sq() <= opt.tau_floor);
        ++degenerate;
      }
    }
  }
  MESSAGE("indefinite inputs " << negative << ", finished columns " << finished
                               << ", degenerate columns " << degenerate);
  CHECK(negative > 0);
}

TEST_CASE("negative definite input raises a degenerate column with its index") {
  const SymmetricMatrix a(Eigen::MatrixXd(-Eigen::MatrixXd::Identity(3, 3)));
  try {
    assemble_precision(a, constant(3, 0.1), constant(3, 1.0));
    FAIL("expected a degenerate column");
  } catch (const DegenerateColumn& e) {
    CHECK(e.column() == 0);
    CHECK(e.tau_sq() <= 0.0);
  }
}

TEST_CASE("bad arguments are rejected") {
  const SymmetricMatrix a = SymmetricMatrix::identity(3);
  CHECK_THROWS_AS(nodewise_column(a, 3, 0.1, 1.0), InvalidInput);
  CHECK_THROWS_AS(nodewise_column(a, 0, -0.1, 1.0), InvalidInput);
  CHECK_THROWS_AS(nodewise_column(a, 0, 0.1, 0.0), InvalidInput);
  CHECK_THROWS_AS(assemble_precision(a, constant(2, 0.1), constant(3, 1.0)), InvalidInput);
}
