#pragma once

#include "despca/linalg.hpp"

#include <vector>

namespace despca {

struct FantopeOptions {
  int max_iter = 2000;
  double tol = 1e-6;
  double penalty = 1.0;  // initial ADMM penalty parameter
  // Residual balancing: every 10 iterations up to adapt_until, double or halve
  // the penalty when one residual exceeds ten times the other. Off gives the
  // fixed-penalty scheme.
  bool adaptive_penalty = true;
  int adapt_until = 1000;
  bool record_merit = false;
};

/// Approximate maximizer of tr(Sigma_hat Z) - lambda ||Z||_1 over the
/// Fantope. `z` is always feasible; `converged` is false when the residual
/// tolerance was not met within max_iter, in which case `z` is the iterate
/// with the smallest residual seen.
struct FantopeSolution {
  SymmetricMatrix z;
  double objective = 0.0;
  // ||X - Y||_F / (p max(||X||_F, ||Y||_F)) and
  // rho ||Y_k - Y_{k-1}||_F / (p max(||rho U||_F, ||Sigma_hat||_F))
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double final_penalty = 0.0;
  int iterations = 0;
  bool converged = false;
  // rho ||Y_{k+1} - Y_k||^2 + rho ||U_{k+1} - U_k||^2 per iteration; this
  // ADMM quantity is non-increasing while the penalty is held fixed.
  std::vector<double> merit;
};

struct InitialEstimate {
  Vector beta_init;
  double scale = 0.0;  // tr(Sigma_hat Z), clipped at 0
  Vector leading_vector;
  bool scale_clipped = false;
};

FantopeSolution solve_fantope(const SymmetricMatrix& sigma_hat, double lambda,
                              const FantopeOptions& options = {});

/// beta_init = tr(Sigma_hat Z)^{1/2} u1, u1 the top eigenvector of Z.
InitialEstimate extract_initial(const FantopeSolution& solution,
                                const SymmetricMatrix& sigma_hat);

}  // namespace despca
