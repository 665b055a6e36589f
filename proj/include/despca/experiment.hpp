#pragma once

#include "despca/pipeline.hpp"
#include "despca/spiked.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace despca {

enum class VarianceMode { known, estimated };

/// Optional replacements for the default_config(p, n) tuning.
struct PipelineOverrides {
  std::optional<double> lambda_init;
  std::optional<double> lambda;
  std::optional<double> l1_budget;
  std::optional<double> radius;
  std::optional<double> nodewise_lambda;
  std::optional<double> nodewise_budget;
  std::optional<double> threshold_c;
  std::optional<bool> center_data;
  std::optional<bool> gaussian_variance_shortcut;
  std::optional<int> fantope_max_iter;
  std::optional<double> fantope_tol;
  std::optional<int> second_step_max_iter;
  std::optional<double> second_step_tol;
  std::optional<int> nodewise_max_iter;
  std::optional<double> nodewise_tol;
};

/// A spike given as strength plus sparse 1-based direction entries, so it
/// can be read before p is known.
struct SpikeSpec {
  double omega = 0.0;
  std::vector<std::pair<Eigen::Index, double>> entries;
};

struct ExperimentConfig {
  int model = 2;                  // 1 or 2; 0 means `spikes` below
  std::vector<SpikeSpec> spikes;  // custom model
  Eigen::Index p = 200;
  Eigen::Index n = 200;
  int reps = 200;
  std::uint64_t seed = 1;
  VarianceMode variance = VarianceMode::known;
  bool run_debiased = true;
  bool run_classical = true;
  std::vector<Eigen::Index> coordinates;  // 1-based; empty means 1..min(9, p)
  double level = 0.95;
  int threads = 1;
  std::string out_dir = "out";
  PipelineOverrides overrides;
};

/// Sets one key from a config file or a command-line flag. Throws
/// ConfigError for unknown keys or malformed values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Reads "key = value" lines ('#' starts a comment). Throws IoError when the
/// file cannot be read and ConfigError on bad content (with line number).
void load_config_file(ExperimentConfig& config, const std::string& path);

/// Throws ConfigError when the configuration is unusable.
void validate(const ExperimentConfig& config);

SpikedModel build_experiment_model(const ExperimentConfig& config);
PipelineConfig resolve_pipeline(const PipelineOverrides& overrides, double level, Eigen::Index p,
                                Eigen::Index n);
std::vector<Eigen::Index> report_coordinates(const ExperimentConfig& config);  // 0-based

/// One method's output on one replication, sign-aligned with beta0.
struct MethodEstimate {
  Vector estimate;
  Vector sd;  // standard deviations used for the intervals
  double eigenvalue = 0.0;
  double eigen_sd = 0.0;
};

struct Replication {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MethodEstimate debiased;
  MethodEstimate classical;
};

struct MethodSummary {
  std::string name;
  std::vector<double> coverage;     // per coordinate, all p
  std::vector<double> mean_length;  // per coordinate, z sd / sqrt(n)
  double coverage_support = 0.0;
  double coverage_complement = 0.0;
  double length_support = 0.0;
  double length_complement = 0.0;
  double eigen_coverage = 0.0;
  double eigen_length = 0.0;
  // sqrt(n)(est_j - beta0_j) / sigma_j over support coordinates, and
  // sqrt(n)(Lambda_hat - Lambda) / sigma_Lambda; true sigmas in both
  double normalized_mean_support = 0.0;
  double normalized_var_support = 0.0;
  double pivot_mean = 0.0;
  double pivot_var = 0.0;
  // [k][r]: report coordinate k, r-th successful replication
  std::vector<std::vector<double>> normalized;
  std::vector<int> normalized_replication;  // replication index per column r
};

struct CoverageReport {
  ExperimentConfig config;
  std::vector<Eigen::Index> support;      // 0-based
  std::vector<Eigen::Index> coordinates;  // 0-based report coordinates
  std::vector<Replication> replications;  // by index, failures included
  std::vector<MethodSummary> methods;
  int completed = 0;
  int failed = 0;
  Vector efficient_length;  // z sigma_j / sqrt(n) from the true variances
  double efficient_support = 0.0;
  double efficient_complement = 0.0;
  double efficient_eigen = 0.0;
  double runtime_seconds = 0.0;  // informational, never serialized
};

/// Runs both methods on one seeded dataset. Pipeline failures are captured
/// in the record, not thrown.
Replication run_replication(const ExperimentConfig& config, const SpikedModel& model,
                            const TrueVariances& truth, const PipelineConfig& pipeline, int index);

/// Pure aggregation of replication records; failed records are excluded and
/// counted. Throws NumericalError when more than 10% failed.
CoverageReport summarize(const ExperimentConfig& config, const SpikedModel& model,
                         const TrueVariances& truth, std::vector<Replication> replications);

CoverageReport run_coverage(const ExperimentConfig& config);

/// Same experiment in estimated-variance mode, whatever `config.variance` says.
CoverageReport run_ci_length(const ExperimentConfig& config);

/// Moore-Penrose inverse of a symmetric matrix (eigenvalues below
/// p * eps * max |eigenvalue| are treated as zero).
Matrix pseudo_inverse(const SymmetricMatrix& a);

}  // namespace despca
