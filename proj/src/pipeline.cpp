#include "despca/pipeline.hpp"

#include "despca/error.hpp"

#include <chrono>
#include <cmath>
#include <string>

namespace despca {
namespace {

template <class F>
auto in_stage(const char* name, double& seconds, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  try {
    auto result = body();
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  } catch (Error& e) {
    e.set_stage(name);
    throw;
  }
}

}  // namespace

PipelineConfig default_config(Eigen::Index p, Eigen::Index n) {
  if (p < 2 || n < 2) throw ConfigError("default tuning needs p >= 2 and n >= 2");
  const double rate = std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
  PipelineConfig c;
  c.lambda_init = rate;
  c.lambda = rate;
  c.nodewise_lambda = rate;
  c.nodewise_budget = 2.0 * std::sqrt(static_cast<double>(p));
  return c;
}

void validate(const PipelineConfig& c, Eigen::Index p) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.lambda_init >= 0 && std::isfinite(c.lambda_init), "lambda_init must be >= 0");
  require(c.lambda >= 0 && std::isfinite(c.lambda), "lambda must be >= 0");
  require(!c.l1_budget || *c.l1_budget > 0, "T must be positive");
  require(!c.radius || *c.radius > 0, "eta must be positive");
  require(c.nodewise_lambda >= 0 && std::isfinite(c.nodewise_lambda), "lambda_j must be >= 0");
  require(c.nodewise_lambdas.empty() ||
              c.nodewise_lambdas.size() == static_cast<std::size_t>(p),
          "per-column lambda_j needs exactly p entries");
  for (double l : c.nodewise_lambdas) require(l >= 0 && std::isfinite(l), "lambda_j must be >= 0");
  require(c.nodewise_budget > 0, "T_j must be positive");
  require(c.level > 0 && c.level < 1, "confidence level must be in (0, 1)");
  require(c.threshold_c > 0, "threshold constant C must be positive");
  require(c.fantope.max_iter >= 1 && c.fantope.tol > 0, "invalid Fantope solver settings");
  require(c.second_step.max_iter >= 1 && c.second_step.tol > 0,
          "invalid second-step solver settings");
  require(c.nodewise.max_iter >= 1 && c.nodewise.tol > 0, "invalid nodewise solver settings");
}

PipelineReport run_pipeline(const DataMatrix& x, const PipelineConfig& config) {
  const Eigen::Index p = x.p();
  const Eigen::Index n = x.n();
  if (n < 2) throw InvalidInput("the pipeline needs n >= 2 observations");
  validate(config, p);

  PipelineReport r;
  const DataMatrix centered =
      config.center_data ? DataMatrix(Matrix(x.rows().rowwise() - x.rows().colwise().mean()))
                         : x;
  r.sigma_hat = in_stage("covariance", r.timings.covariance,
                         [&] { return sample_covariance(centered); });

  r.fantope = in_stage("fantope", r.timings.fantope, [&] {
    return solve_fantope(r.sigma_hat, config.lambda_init, config.fantope);
  });
  double extract_seconds = 0.0;
  r.initial = in_stage("fantope", extract_seconds,
                       [&] { return extract_initial(r.fantope, r.sigma_hat); });
  r.timings.fantope += extract_seconds;

  r.loadings = in_stage("second_step", r.timings.second_step, [&] {
    r.l1_budget = config.l1_budget.value_or(default_l1_budget(r.initial.beta_init));
    r.radius = config.radius.value_or(default_radius(r.sigma_hat));
    const RiskProblem problem{r.sigma_hat, config.lambda, r.l1_budget, r.radius,
                              r.initial.beta_init};
    LoadingsEstimate est = solve_second_step(problem, r.initial.beta_init, config.second_step);
    if (est.beta.dot(r.initial.beta_init) < 0) est.beta = -est.beta;
    return est;
  });
  const Vector& beta = r.loadings.beta;

  r.precision = in_stage("nodewise", r.timings.nodewise, [&] {
    const SymmetricMatrix hessian = risk_hessian(r.sigma_hat, beta);
    std::vector<double> lambdas = config.nodewise_lambdas;
    if (lambdas.empty()) lambdas.assign(static_cast<std::size_t>(p), config.nodewise_lambda);
    const std::vector<double> budgets(static_cast<std::size_t>(p), config.nodewise_budget);
    return assemble_precision(hessian, lambdas, budgets, config.nodewise);
  });

  r.inference = in_stage("inference", r.timings.inference, [&] {
    const Matrix& theta = r.precision.matrix;
    InferenceResult inf;
    inf.level = config.level;
    inf.b_hat = debias_loadings(beta, theta, r.sigma_hat);
    inf.lambda_hat = debias_eigenvalue(beta, theta, r.sigma_hat);
    inf.sigma_j_sq_hat = estimate_sigma_sq(centered, beta, theta);
    inf.sigma_lambda_sq_hat =
        estimate_sigma_lambda_sq(centered, beta, theta, config.gaussian_variance_shortcut);
    inf.intervals = confidence_intervals(inf.b_hat, inf.sigma_j_sq_hat.cwiseSqrt(),
                                         static_cast<std::size_t>(n), config.level);
    const Vector lambda_vec = Vector::Constant(1, inf.lambda_hat);
    const Vector lambda_sigma = Vector::Constant(1, std::sqrt(inf.sigma_lambda_sq_hat));
    inf.lambda_interval = confidence_intervals(lambda_vec, lambda_sigma,
                                               static_cast<std::size_t>(n), config.level)[0];
    inf.support = threshold_support(inf.b_hat, config.threshold_c, static_cast<std::size_t>(p),
                                    static_cast<std::size_t>(n));
    return inf;
  });

  double classical_seconds = 0.0;
  in_stage("classical", classical_seconds, [&] {
    const EigenDecomposition top = top_eigenpairs(r.sigma_hat, 1);
    r.classical_eigenvalue = top.values(0);
    r.classical_baseline = classical_pca(r.sigma_hat);
    if (r.classical_baseline.dot(beta) < 0) r.classical_baseline = -r.classical_baseline;
    return 0;
  });
  return r;
}

}  // namespace despca
