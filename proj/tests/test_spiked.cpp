#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "despca/error.hpp"
#include "despca/mstep.hpp"
#include "despca/spiked.hpp"
#include "helpers.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>
#include <numbers>

using namespace despca;
using namespace testing_support;

namespace {

Eigen::MatrixXd orthonormal(std::mt19937_64& rng, Eigen::Index p, Eigen::Index k) {
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, p, k));
  return qr.householderQ() * Eigen::MatrixXd::Identity(p, k);
}

SpikedModel random_model(std::mt19937_64& rng, Eigen::Index p, int r) {
  const Eigen::MatrixXd q = orthonormal(rng, p, r);
  std::vector<Spike> spikes;
  for (int i = 0; i < r; ++i) spikes.push_back({3.0 / (i + 1), q.col(i)});
  return build_model(p, spikes);
}

}  // namespace

TEST_CASE("paper models have the stated top eigenvalues") {
  CHECK(paper_model(2, 200).lambda_max() == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(paper_model(1, 200).lambda_max() == doctest::Approx(1.8).epsilon(1e-12));
}

TEST_CASE("model invariants") {
  for (int which : {1, 2}) {
    const SpikedModel m = paper_model(which, 50);
    CHECK(m.beta0.squaredNorm() == doctest::Approx(m.lambda_max()).epsilon(1e-10));
    const Eigen::MatrixXd prod =
        m.theta0.matrix() * risk_hessian(m.sigma0, m.beta0).matrix();
    CHECK(max_abs(prod - Eigen::MatrixXd::Identity(50, 50)) <= 1e-8);
    CHECK(m.support() == std::vector<Eigen::Index>{0, 1, 2, 4});
    CHECK(m.rho == doctest::Approx(std::sqrt(m.lambda_max()) - 1.0));
  }
}

TEST_CASE("bad spikes are rejected") {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(6);
  v(0) = 1.0;
  CHECK_THROWS_AS(build_model(6, {{0.0, v}}), InvalidInput);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(6);
  w(0) = 1.0;
  w(1) = 1.0;
  CHECK_THROWS_AS(build_model(6, {{2.0, v}, {1.0, w}}), InvalidInput);
  Eigen::VectorXd e2 = Eigen::VectorXd::Zero(6);
  e2(1) = 1.0;
  CHECK_THROWS_AS(build_model(6, {{1.0, v}, {1.0, e2}}), InvalidInput);
}

TEST_CASE("Theta0 maps beta0 to beta0 / (2 |beta0|^2)") {
  for (int which : {1, 2}) {
    const SpikedModel m = paper_model(which, 40);
    const Eigen::VectorXd lhs = m.theta0.matrix() * m.beta0;
    CHECK(max_abs(lhs - m.beta0 / (2 * m.beta0.squaredNorm())) <= 1e-12);
  }
}

TEST_CASE("Theta0 inverts the population Hessian") {
  for (Eigen::Index p : {5, 20, 50}) {
    const SpikedModel m = paper_model(2, p);
    const Eigen::MatrixXd inv = risk_hessian(m.sigma0, m.beta0).matrix().fullPivLu().inverse();
    CHECK(max_abs(theta0_closed_form(m).matrix() - inv) <= 1e-10);
    const Eigen::MatrixXd h = risk_hessian(m.sigma0, m.beta0).matrix();
    CHECK(max_abs(h * m.theta0.matrix() - Eigen::MatrixXd::Identity(p, p)) <= 1e-8);
    CHECK(max_abs(m.theta0.matrix() * h - Eigen::MatrixXd::Identity(p, p)) <= 1e-8);
  }
}

TEST_CASE("Theta0 rows deviate from the background in at most five places") {
  const SpikedModel m = paper_model(2, 60);
  const double background = 1.0 / m.omegas[0];
  const Eigen::MatrixXd dev =
      m.theta0.matrix() - background * Eigen::MatrixXd::Identity(60, 60);
  int worst = 0;
  for (Eigen::Index j = 0; j < 60; ++j) {
    worst = std::max(worst, static_cast<int>((dev.row(j).array().abs() > 1e-12).count()));
  }
  CHECK(worst <= 5);
  // nodewise sparsity of Theta0 columns
  int max_s = 0;
  for (Eigen::Index j = 0; j < 60; ++j) {
    int s = 0;
    for (Eigen::Index k = 0; k < 60; ++k) {
      if (k != j && std::abs(m.theta0(k, j)) > 1e-12) ++s;
    }
    max_s = std::max(max_s, s);
  }
  CHECK(max_s <= 5);
}

TEST_CASE("general and spiked forms of Theta0 agree") {
  std::mt19937_64 rng(71);
  for (int r : {1, 2, 3}) {
    for (Eigen::Index p : {8, 25, 50}) {
      const SpikedModel m = random_model(rng, p, r);
      CHECK(max_abs(theta0_closed_form(m).matrix() - theta0_spiked_shortcut(m).matrix()) <= 1e-10);
    }
  }
}

TEST_CASE("Sigma0 spectrum") {
  std::mt19937_64 rng(72);
  const SpikedModel m = random_model(rng, 15, 2);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.sigma0.matrix());
  CHECK(es.eigenvalues()(14) == doctest::Approx(1.0 + m.omegas[0]).epsilon(1e-12));
  CHECK(sign_free_distance(es.eigenvectors().col(14), m.spikes[0]) <= 1e-10);
  CHECK(m.spikes[0].dot(m.spikes[1]) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("Hessian spectrum at beta0 for random spiked models") {
  std::mt19937_64 rng(73);
  for (int rep = 0; rep < 10; ++rep) {
    const SpikedModel m = random_model(rng, 12 + rep, 1 + rep % 3);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(risk_hessian(m.sigma0, m.beta0).matrix());
    CHECK(std::abs(es.eigenvalues().maxCoeff() - 2 * m.lambda_max()) <= 1e-8);
    CHECK(std::abs(es.eigenvalues().minCoeff() - (m.lambda_max() - m.eigenvalues(1))) <= 1e-8);
  }
}

TEST_CASE("true variances") {
  const SpikedModel m = paper_model(2, 30);
  const TrueVariances v = true_variances(m);
  CHECK(v.sigma_lambda_sq == doctest::Approx(50.0).epsilon(1e-12));
  CHECK((v.sigma_j_sq.array() >= 0.0).all());
  // second term of the variance: [|beta0|^2 Theta0_j' beta0]^2 = beta0_j^2 / 4
  for (Eigen::Index j = 0; j < 30; ++j) {
    const double term = std::pow(m.beta0.squaredNorm() * m.theta0.matrix().col(j).dot(m.beta0), 2);
    CHECK(term == doctest::Approx(m.beta0(j) * m.beta0(j) / 4).epsilon(1e-12));
    const Eigen::VectorXd t = m.theta0.matrix().col(j);
    const double direct = t.dot(m.sigma0.matrix() * t) * std::pow(m.beta0.squaredNorm(), 2) + term;
    CHECK(v.sigma_j_sq(j) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("true variances agree with Monte Carlo on the support") {
  const SpikedModel m = paper_model(2, 20);
  const TrueVariances v = true_variances(m);
  const Eigen::Index draws = 100000;
  const DataMatrix x = sample_gaussian(m, draws, 7);
  for (Eigen::Index j : m.support()) {
    const Eigen::VectorXd t = m.theta0.matrix().col(j);
    const Eigen::VectorXd w = (x.rows() * t).cwiseProduct(x.rows() * m.beta0);
    const double mean = w.mean();
    const Eigen::ArrayXd c = w.array() - mean;
    const double var = c.square().sum() / double(draws - 1);
    const double m4 = c.pow(4).mean();
    const double se = std::sqrt((m4 - var * var) / double(draws));
    CHECK(std::abs(var - v.sigma_j_sq(j)) <= 3 * se);
  }
}

TEST_CASE("sampling is deterministic per seed") {
  const SpikedModel m = paper_model(2, 10);
  const DataMatrix a = sample_gaussian(m, 50, 42);
  const DataMatrix b = sample_gaussian(m, 50, 42);
  const DataMatrix c = sample_gaussian(m, 50, 43);
  CHECK(a.rows() == b.rows());
  CHECK(a.rows() != c.rows());
}

TEST_CASE("Gaussian stream follows the documented Box-Muller recipe") {
  std::mt19937_64 engine(2024);
  GaussianStream g(2024);
  const double two_pi = 2 * std::numbers::pi;
  for (int k = 0; k < 50; ++k) {
    const double u1 = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    CHECK(g.next() == doctest::Approx(r * std::cos(two_pi * u2)).epsilon(1e-15));
    CHECK(g.next() == doctest::Approx(r * std::sin(two_pi * u2)).epsilon(1e-15));
  }
}

TEST_CASE("large samples reproduce Sigma0") {
  const SpikedModel m = paper_model(2, 10);
  const SymmetricMatrix s = sample_covariance(sample_gaussian(m, 100000, 8));
  CHECK(max_abs(s.matrix() - m.sigma0.matrix()) <= 0.1);
}

TEST_CASE("identity covariance gives squared norms near p") {
  const SymmetricMatrix eye = SymmetricMatrix::identity(12);
  const DataMatrix x = sample_gaussian(eye, 10000, 9);
  const double mean = x.rows().rowwise().squaredNorm().mean();
  CHECK(std::abs(mean / 12.0 - 1.0) <= 0.05);
}

TEST_CASE("indefinite covariance cannot be sampled") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  a(2, 2) = -1.0;
  CHECK_THROWS_AS(sample_gaussian(SymmetricMatrix(a), 5, 1), InvalidInput);
}
