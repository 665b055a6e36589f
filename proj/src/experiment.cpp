#include "despca/experiment.hpp"

#include "despca/error.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace despca {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(v)) {
    throw ConfigError("'" + key + "' expects a finite number, got '" + text + "'");
  }
  return v;
}

long long parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_seed(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("'" + key + "' expects a nonnegative 64-bit integer, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + text + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

// "1,2,5" or "1-9" or a mix such as "1-4,7"
std::vector<Eigen::Index> parse_coordinates(const std::string& key, const std::string& text) {
  std::vector<Eigen::Index> out;
  for (const std::string& part : split(text, ',')) {
    if (part.empty()) throw ConfigError("'" + key + "' has an empty entry");
    const auto dash = part.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(parse_int(key, part));
    } else {
      const long long a = parse_int(key, part.substr(0, dash));
      const long long b = parse_int(key, part.substr(dash + 1));
      if (b < a) throw ConfigError("'" + key + "' has a decreasing range '" + part + "'");
      for (long long i = a; i <= b; ++i) out.push_back(i);
    }
  }
  return out;
}

// "<omega> <index>:<value> <index>:<value> ..."
SpikeSpec parse_spike(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  std::string token;
  SpikeSpec spec;
  if (!(in >> token)) throw ConfigError("'" + key + "' needs a strength and entries");
  spec.omega = parse_double(key, token);
  while (in >> token) {
    const auto colon = token.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("'" + key + "' entries look like index:value, got '" + token + "'");
    }
    spec.entries.emplace_back(parse_int(key, token.substr(0, colon)),
                              parse_double(key, token.substr(colon + 1)));
  }
  if (spec.entries.empty()) throw ConfigError("'" + key + "' needs at least one entry");
  return spec;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

DataMatrix maybe_center(const DataMatrix& x, bool center) {
  if (!center) return x;
  return DataMatrix(Matrix(x.rows().rowwise() - x.rows().colwise().mean()));
}

template <class Body>
void parallel_for(int count, int threads, Body&& body) {
  threads = std::clamp(threads, 1, std::max(count, 1));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

MethodSummary summarize_method(const std::string& name, const CoverageReport& r,
                               const SpikedModel& model, const TrueVariances& truth,
                               bool debiased) {
  const ExperimentConfig& c = r.config;
  const Eigen::Index p = c.p;
  const double root_n = std::sqrt(static_cast<double>(c.n));
  const double z = normal_quantile(0.5 * (1.0 + c.level));

  MethodSummary m;
  m.name = name;
  m.coverage.assign(static_cast<std::size_t>(p), 0.0);
  m.mean_length.assign(static_cast<std::size_t>(p), 0.0);
  m.normalized.assign(r.coordinates.size(), {});
  std::vector<double> support_values;
  std::vector<double> pivots;
  int eigen_hits = 0;
  double eigen_length = 0.0;
  const Vector true_sd = truth.sigma_j_sq.cwiseSqrt();
  const double true_eigen_sd = std::sqrt(truth.sigma_lambda_sq);

  for (const Replication& rep : r.replications) {
    if (!rep.ok) continue;
    const MethodEstimate& e = debiased ? rep.debiased : rep.classical;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double half = z * std::max(e.sd(j), 0.0) / root_n;
      const auto jj = static_cast<std::size_t>(j);
      if (std::abs(e.estimate(j) - model.beta0(j)) <= half) m.coverage[jj] += 1.0;
      m.mean_length[jj] += half;
    }
    for (Eigen::Index j : r.support) {
      support_values.push_back(root_n * (e.estimate(j) - model.beta0(j)) / true_sd(j));
    }
    for (std::size_t k = 0; k < r.coordinates.size(); ++k) {
      const Eigen::Index j = r.coordinates[k];
      m.normalized[k].push_back(root_n * (e.estimate(j) - model.beta0(j)) / true_sd(j));
    }
    m.normalized_replication.push_back(rep.index);
    const double eigen_half = z * std::max(e.eigen_sd, 0.0) / root_n;
    if (std::abs(e.eigenvalue - model.lambda_max()) <= eigen_half) ++eigen_hits;
    eigen_length += eigen_half;
    pivots.push_back(root_n * (e.eigenvalue - model.lambda_max()) / true_eigen_sd);
  }

  const double done = static_cast<double>(r.completed);
  std::vector<double> on;
  std::vector<double> off;
  std::vector<double> len_on;
  std::vector<double> len_off;
  std::vector<bool> in_support(static_cast<std::size_t>(p), false);
  for (Eigen::Index j : r.support) in_support[static_cast<std::size_t>(j)] = true;
  for (std::size_t j = 0; j < static_cast<std::size_t>(p); ++j) {
    m.coverage[j] /= done;
    m.mean_length[j] /= done;
    (in_support[j] ? on : off).push_back(m.coverage[j]);
    (in_support[j] ? len_on : len_off).push_back(m.mean_length[j]);
  }
  m.coverage_support = mean_of(on);
  m.coverage_complement = mean_of(off);
  m.length_support = mean_of(len_on);
  m.length_complement = mean_of(len_off);
  m.eigen_coverage = eigen_hits / done;
  m.eigen_length = eigen_length / done;
  m.normalized_mean_support = mean_of(support_values);
  m.normalized_var_support = variance_of(support_values);
  m.pivot_mean = mean_of(pivots);
  m.pivot_var = variance_of(pivots);
  return m;
}

}  // namespace

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& value) {
  const std::string key = lower(trim(raw_key));
  const std::string v = trim(value);
  PipelineOverrides& o = c.overrides;
  if (key == "model") {
    const std::string m = lower(v);
    if (m == "1") {
      c.model = 1;
    } else if (m == "2") {
      c.model = 2;
    } else if (m == "custom") {
      c.model = 0;
    } else {
      throw ConfigError("'model' must be 1, 2 or custom, got '" + value + "'");
    }
  } else if (key == "spike") {
    c.spikes.push_back(parse_spike(key, v));
  } else if (key == "p") {
    c.p = parse_int(key, v);
  } else if (key == "n") {
    c.n = parse_int(key, v);
  } else if (key == "reps") {
    const long long r = parse_int(key, v);
    if (r < 1 || r > std::numeric_limits<int>::max()) throw ConfigError("'reps' must be >= 1");
    c.reps = static_cast<int>(r);
  } else if (key == "seed") {
    c.seed = parse_seed(key, v);
  } else if (key == "variance") {
    const std::string m = lower(v);
    if (m == "known") {
      c.variance = VarianceMode::known;
    } else if (m == "estimated") {
      c.variance = VarianceMode::estimated;
    } else {
      throw ConfigError("'variance' must be known or estimated, got '" + value + "'");
    }
  } else if (key == "methods") {
    c.run_debiased = false;
    c.run_classical = false;
    for (const std::string& m : split(lower(v), ',')) {
      if (m == "debiased") {
        c.run_debiased = true;
      } else if (m == "classical") {
        c.run_classical = true;
      } else {
        throw ConfigError("'methods' entries must be debiased or classical, got '" + m + "'");
      }
    }
  } else if (key == "coordinates") {
    c.coordinates = parse_coordinates(key, v);
  } else if (key == "level") {
    c.level = parse_double(key, v);
  } else if (key == "threads") {
    const long long t = parse_int(key, v);
    if (t < 1 || t > 1024) throw ConfigError("'threads' must be in [1, 1024]");
    c.threads = static_cast<int>(t);
  } else if (key == "out") {
    if (v.empty()) throw ConfigError("'out' must not be empty");
    c.out_dir = v;
  } else if (key == "lambda_init") {
    o.lambda_init = parse_double(key, v);
  } else if (key == "lambda") {
    o.lambda = parse_double(key, v);
  } else if (key == "t") {
    o.l1_budget = parse_double(key, v);
  } else if (key == "eta") {
    o.radius = parse_double(key, v);
  } else if (key == "lambda_j") {
    o.nodewise_lambda = parse_double(key, v);
  } else if (key == "t_j") {
    o.nodewise_budget = parse_double(key, v);
  } else if (key == "c") {
    o.threshold_c = parse_double(key, v);
  } else if (key == "center_data") {
    o.center_data = parse_bool(key, v);
  } else if (key == "gaussian_shortcut") {
    o.gaussian_variance_shortcut = parse_bool(key, v);
  } else if (key == "fantope_max_iter") {
    o.fantope_max_iter = static_cast<int>(parse_int(key, v));
  } else if (key == "fantope_tol") {
    o.fantope_tol = parse_double(key, v);
  } else if (key == "second_step_max_iter") {
    o.second_step_max_iter = static_cast<int>(parse_int(key, v));
  } else if (key == "second_step_tol") {
    o.second_step_tol = parse_double(key, v);
  } else if (key == "nodewise_max_iter") {
    o.nodewise_max_iter = static_cast<int>(parse_int(key, v));
  } else if (key == "nodewise_tol") {
    o.nodewise_tol = parse_double(key, v);
  } else {
    throw ConfigError("unknown setting '" + raw_key + "'");
  }
}

void load_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(number) + ": expected key = value");
    }
    try {
      apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(number) + ": " + e.message());
    }
  }
  if (in.bad()) throw IoError("error while reading config file '" + path + "'");
}

void validate(const ExperimentConfig& c) {
  if (c.p < 2) throw ConfigError("p must be >= 2");
  if (c.n < 2) throw ConfigError("n must be >= 2");
  if ((c.model == 1 || c.model == 2) && c.p < 5) throw ConfigError("models 1 and 2 need p >= 5");
  if (c.model == 0 && c.spikes.empty()) {
    throw ConfigError("a custom model needs at least one 'spike' entry");
  }
  if (c.model != 0 && !c.spikes.empty()) {
    throw ConfigError("'spike' entries are only used with model = custom");
  }
  for (const SpikeSpec& s : c.spikes) {
    for (const auto& [i, v] : s.entries) {
      if (i < 1 || i > c.p) throw ConfigError("spike entry index out of [1, p]");
    }
  }
  if (c.reps < 1) throw ConfigError("reps must be >= 1");
  if (!(c.level > 0.0 && c.level < 1.0)) throw ConfigError("level must be in (0, 1)");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  if (!c.run_debiased && !c.run_classical) throw ConfigError("no method selected");
  for (Eigen::Index k : c.coordinates) {
    if (k < 1 || k > c.p) {
      throw ConfigError("coordinate " + std::to_string(k) + " is outside [1, p]");
    }
  }
  validate(resolve_pipeline(c.overrides, c.level, c.p, c.n), c.p);
}

SpikedModel build_experiment_model(const ExperimentConfig& c) {
  if (c.model == 1 || c.model == 2) return paper_model(c.model, c.p);
  std::vector<Spike> spikes;
  for (const SpikeSpec& s : c.spikes) {
    Spike spike{s.omega, Vector::Zero(c.p)};
    for (const auto& [i, v] : s.entries) spike.direction(i - 1) = v;
    spikes.push_back(std::move(spike));
  }
  try {
    return build_model(c.p, spikes);
  } catch (const InvalidInput& e) {
    throw ConfigError("custom model: " + e.message());
  }
}

PipelineConfig resolve_pipeline(const PipelineOverrides& o, double level, Eigen::Index p,
                                Eigen::Index n) {
  PipelineConfig pc = default_config(p, n);
  pc.level = level;
  if (o.lambda_init) pc.lambda_init = *o.lambda_init;
  if (o.lambda) pc.lambda = *o.lambda;
  if (o.l1_budget) pc.l1_budget = *o.l1_budget;
  if (o.radius) pc.radius = *o.radius;
  if (o.nodewise_lambda) pc.nodewise_lambda = *o.nodewise_lambda;
  if (o.nodewise_budget) pc.nodewise_budget = *o.nodewise_budget;
  if (o.threshold_c) pc.threshold_c = *o.threshold_c;
  if (o.center_data) pc.center_data = *o.center_data;
  if (o.gaussian_variance_shortcut) pc.gaussian_variance_shortcut = *o.gaussian_variance_shortcut;
  if (o.fantope_max_iter) pc.fantope.max_iter = *o.fantope_max_iter;
  if (o.fantope_tol) pc.fantope.tol = *o.fantope_tol;
  if (o.second_step_max_iter) pc.second_step.max_iter = *o.second_step_max_iter;
  if (o.second_step_tol) pc.second_step.tol = *o.second_step_tol;
  if (o.nodewise_max_iter) pc.nodewise.max_iter = *o.nodewise_max_iter;
  if (o.nodewise_tol) pc.nodewise.tol = *o.nodewise_tol;
  return pc;
}

std::vector<Eigen::Index> report_coordinates(const ExperimentConfig& c) {
  std::vector<Eigen::Index> out;
  if (c.coordinates.empty()) {
    for (Eigen::Index j = 0; j < std::min<Eigen::Index>(9, c.p); ++j) out.push_back(j);
  } else {
    for (Eigen::Index k : c.coordinates) out.push_back(k - 1);
  }
  return out;
}

Matrix pseudo_inverse(const SymmetricMatrix& a) {
  const EigenDecomposition eig = symmetric_eigen(a);
  const double scale = eig.values.cwiseAbs().maxCoeff();
  const double cutoff =
      static_cast<double>(a.dim()) * std::numeric_limits<double>::epsilon() * scale;
  Vector inv = Vector::Zero(eig.values.size());
  for (Eigen::Index i = 0; i < inv.size(); ++i) {
    if (std::abs(eig.values(i)) > cutoff) inv(i) = 1.0 / eig.values(i);
  }
  return eig.vectors * inv.asDiagonal() * eig.vectors.transpose();
}

Replication run_replication(const ExperimentConfig& config, const SpikedModel& model,
                            const TrueVariances& truth, const PipelineConfig& pipeline,
                            int index) {
  Replication rec;
  rec.index = index;
  rec.seed = config.seed + static_cast<std::uint64_t>(index);
  const bool known = config.variance == VarianceMode::known;
  try {
    const DataMatrix x = sample_gaussian(model, config.n, rec.seed);
    if (config.run_debiased) {
      const PipelineReport rep = run_pipeline(x, pipeline);
      const double sign = rep.loadings.beta.dot(model.beta0) < 0 ? -1.0 : 1.0;
      MethodEstimate& e = rec.debiased;
      e.estimate = sign * rep.inference.b_hat;
      e.eigenvalue = rep.inference.lambda_hat;
      if (known) {
        e.sd = truth.sigma_j_sq.cwiseSqrt();
        e.eigen_sd = std::sqrt(truth.sigma_lambda_sq);
      } else {
        e.sd = rep.inference.sigma_j_sq_hat.cwiseMax(0.0).cwiseSqrt();
        e.eigen_sd = std::sqrt(std::max(rep.inference.sigma_lambda_sq_hat, 0.0));
      }
    }
    if (config.run_classical) {
      const DataMatrix xc = maybe_center(x, pipeline.center_data);
      const SymmetricMatrix s = sample_covariance(xc);
      Vector est = classical_pca(s);
      if (est.dot(model.beta0) < 0) est = -est;
      MethodEstimate& e = rec.classical;
      e.estimate = est;
      e.eigenvalue = est.squaredNorm();
      if (known) {
        e.sd = truth.sigma_j_sq.cwiseSqrt();
        e.eigen_sd = std::sqrt(truth.sigma_lambda_sq);
      } else {
        const Matrix theta = pseudo_inverse(s);
        e.sd = estimate_sigma_sq(xc, est, theta).cwiseMax(0.0).cwiseSqrt();
        e.eigen_sd = std::sqrt(std::max(
            estimate_sigma_lambda_sq(xc, est, theta, pipeline.gaussian_variance_shortcut), 0.0));
      }
    }
    rec.ok = true;
  } catch (const Error& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

CoverageReport summarize(const ExperimentConfig& config, const SpikedModel& model,
                         const TrueVariances& truth, std::vector<Replication> replications) {
  CoverageReport r;
  r.config = config;
  r.support = model.support();
  r.coordinates = report_coordinates(config);
  r.replications = std::move(replications);
  std::sort(r.replications.begin(), r.replications.end(),
            [](const Replication& a, const Replication& b) { return a.index < b.index; });
  for (const Replication& rep : r.replications) (rep.ok ? r.completed : r.failed) += 1;

  const int total = r.completed + r.failed;
  if (r.failed * 10 > total) {
    std::string first;
    for (const Replication& rep : r.replications) {
      if (!rep.ok) {
        first = "replication " + std::to_string(rep.index) + ": " + rep.error;
        break;
      }
    }
    throw NumericalError(std::to_string(r.failed) + " of " + std::to_string(total) +
                         " replications failed (more than 10%); first failure: " + first);
  }

  const double z = normal_quantile(0.5 * (1.0 + config.level));
  const double root_n = std::sqrt(static_cast<double>(config.n));
  r.efficient_length = z * truth.sigma_j_sq.cwiseSqrt() / root_n;
  std::vector<double> on;
  std::vector<double> off;
  std::vector<bool> in_support(static_cast<std::size_t>(config.p), false);
  for (Eigen::Index j : r.support) in_support[static_cast<std::size_t>(j)] = true;
  for (Eigen::Index j = 0; j < config.p; ++j) {
    (in_support[static_cast<std::size_t>(j)] ? on : off).push_back(r.efficient_length(j));
  }
  r.efficient_support = mean_of(on);
  r.efficient_complement = mean_of(off);
  r.efficient_eigen = z * std::sqrt(truth.sigma_lambda_sq) / root_n;

  if (config.run_debiased) r.methods.push_back(summarize_method("debiased", r, model, truth, true));
  if (config.run_classical) {
    r.methods.push_back(summarize_method("classical", r, model, truth, false));
  }
  return r;
}

CoverageReport run_coverage(const ExperimentConfig& config) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  const SpikedModel model = build_experiment_model(config);
  const TrueVariances truth = true_variances(model);
  const PipelineConfig pipeline = resolve_pipeline(config.overrides, config.level, config.p,
                                                   config.n);
  std::vector<Replication> records(static_cast<std::size_t>(config.reps));
  parallel_for(config.reps, config.threads, [&](int r) {
    records[static_cast<std::size_t>(r)] = run_replication(config, model, truth, pipeline, r);
  });
  CoverageReport report = summarize(config, model, truth, std::move(records));
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

CoverageReport run_ci_length(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.variance = VarianceMode::estimated;
  return run_coverage(c);
}

}  // namespace despca
