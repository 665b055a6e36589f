#pragma once

#include "despca/debias.hpp"
#include "despca/fantope.hpp"
#include "despca/linalg.hpp"
#include "despca/mstep.hpp"
#include "despca/nodewise.hpp"

#include <optional>
#include <vector>

namespace despca {

/// Tuning for the whole de-biased sparse PCA run. Defaults live in
/// default_config(); unset optionals are resolved from the data.
struct PipelineConfig {
  double lambda_init = 0.0;
  double lambda = 0.0;
  std::optional<double> l1_budget;      // T; default 2 ||beta_init||_1 + 1
  std::optional<double> radius;         // eta; default from the top two eigenvalues
  double nodewise_lambda = 0.0;         // shared lambda_j
  std::vector<double> nodewise_lambdas;  // per-column override, size p when set
  double nodewise_budget = 0.0;         // shared T_j
  double level = 0.95;
  double threshold_c = 1.0;
  bool gaussian_variance_shortcut = true;
  bool center_data = false;
  FantopeOptions fantope;
  SecondStepOptions second_step;
  NodewiseOptions nodewise;
};

/// lambda_init = lambda = lambda_j = sqrt(log p / n), T_j = 2 sqrt(p),
/// level 0.95, C = 1.
PipelineConfig default_config(Eigen::Index p, Eigen::Index n);

/// Throws ConfigError when a field is out of range.
void validate(const PipelineConfig& config, Eigen::Index p);

struct StageTimings {
  double covariance = 0.0;
  double fantope = 0.0;
  double second_step = 0.0;
  double nodewise = 0.0;
  double inference = 0.0;
};

struct PipelineReport {
  SymmetricMatrix sigma_hat;
  FantopeSolution fantope;
  InitialEstimate initial;
  double l1_budget = 0.0;
  double radius = 0.0;
  LoadingsEstimate loadings;
  PrecisionEstimate precision;
  InferenceResult inference;
  Vector classical_baseline;   // sign-aligned with the loadings estimate
  double classical_eigenvalue = 0.0;
  StageTimings timings;        // wall-clock; not part of the deterministic output
};

PipelineReport run_pipeline(const DataMatrix& x, const PipelineConfig& config);

}  // namespace despca
