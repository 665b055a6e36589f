#pragma once

#include "despca/linalg.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace despca {

struct NodewiseOptions {
  int max_iter = 20000;
  double tol = 1e-7;
  double tau_floor = 1e-8;
  // Largest proximal step; 0 means 1 / (2 ||A||_2), the reciprocal Lipschitz
  // constant, so iterates from gamma = 0 stay in the local basin.
  double max_step = 0.0;
};

/// One column of the nodewise inverse. `gamma` has p - 1 entries (index j
/// removed); `big_gamma` is the full vector with entry j equal to 1 and
/// entries k != j equal to -gamma.
struct NodewiseColumn {
  std::size_t j = 0;
  Vector gamma;
  Vector big_gamma;
  double tau_sq = 0.0;
  Vector theta;
  double kkt_residual = 0.0;
  bool boundary_active = false;
  bool converged = false;
  int iterations = 0;
};

struct PrecisionEstimate {
  std::vector<NodewiseColumn> columns;
  Matrix matrix;  // column k equals columns[k].theta
};

/// Per-column certificates next to the entrywise max |A^T Theta - I|.
struct InverseResidual {
  double max_abs = 0.0;
  std::vector<double> diagonal_gap;  // |A_j^T Gamma_j - tau_j^2|
  std::vector<double> offdiag_max;   // ||A_{-j}^T Gamma_j||_inf
};

/// Stationary point of min Gamma^T A Gamma + lambda_j ||gamma||_1 subject to
/// ||gamma||_1 <= budget_j, by projected proximal gradient from gamma = 0.
/// Throws DegenerateColumn when tau^2 <= tau_floor.
NodewiseColumn nodewise_column(const SymmetricMatrix& a, std::size_t j, double lambda_j,
                               double budget_j, const NodewiseOptions& options = {});

PrecisionEstimate assemble_precision(const SymmetricMatrix& a, std::span<const double> lambdas,
                                     std::span<const double> budgets,
                                     const NodewiseOptions& options = {});

/// max_{ij} |(A^T Theta - I)_{ij}|
double max_inverse_residual(const SymmetricMatrix& a, const Matrix& theta);

InverseResidual inverse_residual(const SymmetricMatrix& a, const PrecisionEstimate& theta);

}  // namespace despca
