#include "despca/report.hpp"

#include "despca/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#ifndef DESPCA_VERSION
#define DESPCA_VERSION "unknown"
#endif

namespace despca {
namespace {

using nlohmann::json;

void dump_into(const json& v, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) + 2, ' ');
  const std::string close_pad(static_cast<std::size_t>(indent), ' ');
  switch (v.type()) {
    case json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        dump_into(it.value(), indent + 2, out);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      // numeric arrays on one line keep per-coordinate tables readable
      bool flat = true;
      for (const json& e : v) flat = flat && (e.is_number() || e.is_null());
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i) out += ", ";
          dump_into(v[i], indent + 2, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump_into(v[i], indent + 2, out);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case json::value_t::number_float: {
      const double d = v.get<double>();
      out += std::isfinite(d) ? format_number(d) : "null";
      return;
    }
    default:
      out += v.dump();
  }
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number_or_null(v(i)));
  return a;
}

json doubles_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

json one_based(const std::vector<Eigen::Index>& idx) {
  json a = json::array();
  for (Eigen::Index i : idx) a.push_back(i + 1);
  return a;
}

json pipeline_json(const PipelineConfig& c) {
  json j;
  j["lambda_init"] = c.lambda_init;
  j["lambda"] = c.lambda;
  j["T"] = c.l1_budget ? json(*c.l1_budget) : json("default");
  j["eta"] = c.radius ? json(*c.radius) : json("default");
  j["lambda_j"] = c.nodewise_lambda;
  j["T_j"] = c.nodewise_budget;
  j["level"] = c.level;
  j["C"] = c.threshold_c;
  j["gaussian_shortcut"] = c.gaussian_variance_shortcut;
  j["center_data"] = c.center_data;
  j["fantope_max_iter"] = c.fantope.max_iter;
  j["fantope_tol"] = c.fantope.tol;
  j["second_step_max_iter"] = c.second_step.max_iter;
  j["second_step_tol"] = c.second_step.tol;
  j["nodewise_max_iter"] = c.nodewise.max_iter;
  j["nodewise_tol"] = c.nodewise.tol;
  return j;
}

const MethodEstimate& pick(const Replication& r, const MethodSummary& m) {
  return m.name == "classical" ? r.classical : r.debiased;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

const char* version_string() { return DESPCA_VERSION; }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
  if (!out_) throw IoError("cannot open '" + path + "' for writing");
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << csv_escape(fields[i]);
  }
  out_ << "\r\n";
  if (!out_) throw IoError("write failed on '" + path_ + "'");
}

void CsvWriter::close() {
  out_.close();
  if (out_.fail()) throw IoError("could not finish writing '" + path_ + "'");
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      record.push_back(std::move(field));
      field.clear();
      records.push_back(std::move(record));
      record.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

DataMatrix read_data_csv(const std::string& path, bool header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read data file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  auto records = parse_csv(buf.str());

  std::size_t first = header ? 1 : 0;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  for (std::size_t r = first; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    for (std::size_t k = 0; k < rec.size(); ++k) {
      std::string f = rec[k];
      const auto b = f.find_first_not_of(" \t");
      const auto e = f.find_last_not_of(" \t");
      f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw IoError(path + ": record " + std::to_string(r + 1) + ", field " +
                      std::to_string(k + 1) + ": not a finite number '" + rec[k] + "'");
      }
      row.push_back(v);
    }
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw IoError(path + ": record " + std::to_string(r + 1) + " has " +
                    std::to_string(row.size()) + " fields, expected " + std::to_string(width));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path + ": no observations");
  if (width < 2) throw IoError(path + ": need at least 2 columns (p >= 2)");
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < width; ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return DataMatrix(std::move(x));
}

std::string dump_json(const json& value) {
  std::string out;
  dump_into(value, 0, out);
  out += "\n";
  return out;
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["model"] = c.model == 0 ? json("custom") : json(c.model);
  json spikes = json::array();
  for (const SpikeSpec& s : c.spikes) {
    json entries = json::array();
    for (const auto& [i, v] : s.entries) entries.push_back({i, v});
    spikes.push_back({{"omega", s.omega}, {"entries", entries}});
  }
  j["spikes"] = spikes;
  j["p"] = c.p;
  j["n"] = c.n;
  j["reps"] = c.reps;
  j["seed"] = c.seed;
  j["variance"] = c.variance == VarianceMode::known ? "known" : "estimated";
  json methods = json::array();
  if (c.run_debiased) methods.push_back("debiased");
  if (c.run_classical) methods.push_back("classical");
  j["methods"] = methods;
  j["coordinates"] = one_based(report_coordinates(c));
  j["level"] = c.level;
  j["pipeline"] = pipeline_json(resolve_pipeline(c.overrides, c.level, c.p, c.n));
  return j;
}

json report_json(const CoverageReport& r, const std::string& command) {
  json j;
  j["command"] = command;
  j["version"] = version_string();
  j["config"] = config_json(r.config);
  j["completed"] = r.completed;
  j["failed"] = r.failed;
  json failures = json::array();
  for (const Replication& rep : r.replications) {
    if (!rep.ok) failures.push_back({{"replication", rep.index}, {"seed", rep.seed},
                                     {"error", rep.error}});
  }
  j["failures"] = failures;
  j["support"] = one_based(r.support);
  j["efficient"] = {{"length_support", number_or_null(r.efficient_support)},
                    {"length_complement", number_or_null(r.efficient_complement)},
                    {"eigen_length", number_or_null(r.efficient_eigen)},
                    {"length", vector_json(r.efficient_length)}};
  json methods = json::object();
  for (const MethodSummary& m : r.methods) {
    methods[m.name] = {
        {"coverage_support", number_or_null(m.coverage_support)},
        {"coverage_complement", number_or_null(m.coverage_complement)},
        {"length_support", number_or_null(m.length_support)},
        {"length_complement", number_or_null(m.length_complement)},
        {"eigen_coverage", number_or_null(m.eigen_coverage)},
        {"eigen_length", number_or_null(m.eigen_length)},
        {"normalized_mean_support", number_or_null(m.normalized_mean_support)},
        {"normalized_var_support", number_or_null(m.normalized_var_support)},
        {"pivot_mean", number_or_null(m.pivot_mean)},
        {"pivot_var", number_or_null(m.pivot_var)},
        {"coverage", doubles_json(m.coverage)},
        {"mean_length", doubles_json(m.mean_length)}};
  }
  j["methods"] = methods;
  return j;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir + "'" +
                  (ec ? ": " + ec.message() : std::string()));
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.close();
  if (out.fail()) throw IoError("write failed on '" + path + "'");
}

void write_coverage_outputs(const CoverageReport& r, const std::string& dir,
                            const std::string& command) {
  ensure_directory(dir);
  const ExperimentConfig& c = r.config;
  const SpikedModel model = build_experiment_model(c);
  const double z = normal_quantile(0.5 * (1.0 + c.level));
  const double root_n = std::sqrt(static_cast<double>(c.n));
  std::vector<bool> in_support(static_cast<std::size_t>(c.p), false);
  for (Eigen::Index j : r.support) in_support[static_cast<std::size_t>(j)] = true;

  CsvWriter cov(join_path(dir, "coverage.csv"));
  cov.row({"method", "coordinate", "in_support", "coverage", "mean_length", "efficient_length"});
  for (const MethodSummary& m : r.methods) {
    for (Eigen::Index j = 0; j < c.p; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      cov.row({m.name, std::to_string(j + 1), in_support[jj] ? "1" : "0",
               format_number(m.coverage[jj]), format_number(m.mean_length[jj]),
               format_number(r.efficient_length(j))});
    }
  }
  cov.close();

  CsvWriter est(join_path(dir, "estimates.csv"));
  est.row({"method", "replication", "coordinate", "truth", "estimate", "sd", "lower", "upper",
           "covered"});
  CsvWriter eig(join_path(dir, "eigen.csv"));
  eig.row({"method", "replication", "truth", "eigenvalue", "sd", "lower", "upper", "covered"});
  for (const MethodSummary& m : r.methods) {
    for (const Replication& rep : r.replications) {
      if (!rep.ok) continue;
      const MethodEstimate& e = pick(rep, m);
      for (Eigen::Index j = 0; j < c.p; ++j) {
        const double half = z * std::max(e.sd(j), 0.0) / root_n;
        const bool hit = std::abs(e.estimate(j) - model.beta0(j)) <= half;
        est.row({m.name, std::to_string(rep.index), std::to_string(j + 1),
                 format_number(model.beta0(j)), format_number(e.estimate(j)),
                 format_number(e.sd(j)), format_number(e.estimate(j) - half),
                 format_number(e.estimate(j) + half), hit ? "1" : "0"});
      }
      const double half = z * std::max(e.eigen_sd, 0.0) / root_n;
      const bool hit = std::abs(e.eigenvalue - model.lambda_max()) <= half;
      eig.row({m.name, std::to_string(rep.index), format_number(model.lambda_max()),
               format_number(e.eigenvalue), format_number(e.eigen_sd),
               format_number(e.eigenvalue - half), format_number(e.eigenvalue + half),
               hit ? "1" : "0"});
    }
  }
  est.close();
  eig.close();

  CsvWriter reps(join_path(dir, "replications.csv"));
  reps.row({"replication", "seed", "status", "error"});
  for (const Replication& rep : r.replications) {
    reps.row({std::to_string(rep.index), std::to_string(rep.seed), rep.ok ? "ok" : "failed",
              rep.error});
  }
  reps.close();

  write_text_file(join_path(dir, "summary.json"), dump_json(report_json(r, command)));
}

void write_length_outputs(const CoverageReport& r, const std::string& dir) {
  write_coverage_outputs(r, dir, "ci-length");
  CsvWriter out(join_path(dir, "lengths.csv"));
  out.row({"method", "set", "mean_length", "efficient_length"});
  for (const MethodSummary& m : r.methods) {
    out.row({m.name, "support", format_number(m.length_support),
             format_number(r.efficient_support)});
    out.row({m.name, "complement", format_number(m.length_complement),
             format_number(r.efficient_complement)});
    out.row({m.name, "eigenvalue", format_number(m.eigen_length),
             format_number(r.efficient_eigen)});
  }
  out.close();
}

void export_histograms(const CoverageReport& r, const std::string& dir) {
  ensure_directory(dir);
  for (const MethodSummary& m : r.methods) {
    CsvWriter out(join_path(dir, "hist_" + m.name + ".csv"));
    out.row({"coordinate", "replication", "value"});
    for (std::size_t k = 0; k < m.normalized.size(); ++k) {
      for (std::size_t i = 0; i < m.normalized[k].size(); ++i) {
        out.row({std::to_string(r.coordinates[k] + 1),
                 std::to_string(m.normalized_replication[i]),
                 format_number(m.normalized[k][i])});
      }
    }
    out.close();
  }
  write_text_file(join_path(dir, "summary.json"), dump_json(report_json(r, "histograms")));
}

void write_single_run(const PipelineReport& r, const PipelineConfig& config,
                      const std::string& input, Eigen::Index n, const std::string& dir) {
  ensure_directory(dir);
  const InferenceResult& inf = r.inference;
  const Eigen::Index p = inf.b_hat.size();
  std::vector<bool> selected(static_cast<std::size_t>(p), false);
  for (std::size_t j : inf.support) selected[j] = true;

  CsvWriter out(join_path(dir, "estimates.csv"));
  out.row({"coordinate", "beta_init", "beta_hat", "b_hat", "sigma_sq_hat", "lower", "upper",
           "selected", "classical"});
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    out.row({std::to_string(j + 1), format_number(r.initial.beta_init(j)),
             format_number(r.loadings.beta(j)), format_number(inf.b_hat(j)),
             format_number(inf.sigma_j_sq_hat(j)), format_number(inf.intervals[jj].lo),
             format_number(inf.intervals[jj].hi), selected[jj] ? "1" : "0",
             format_number(r.classical_baseline(j))});
  }
  out.close();

  int nodewise_converged = 0;
  int nodewise_boundary = 0;
  int nodewise_max_iter = 0;
  double nodewise_kkt = 0.0;
  for (const NodewiseColumn& col : r.precision.columns) {
    nodewise_converged += col.converged ? 1 : 0;
    nodewise_boundary += col.boundary_active ? 1 : 0;
    nodewise_max_iter = std::max(nodewise_max_iter, col.iterations);
    nodewise_kkt = std::max(nodewise_kkt, col.kkt_residual);
  }
  json support = json::array();
  for (std::size_t j : inf.support) support.push_back(j + 1);

  PipelineConfig echoed = config;
  echoed.l1_budget = r.l1_budget;
  echoed.radius = r.radius;
  json j;
  j["command"] = "run-one";
  j["version"] = version_string();
  j["input"] = input;
  j["n"] = n;
  j["p"] = p;
  j["config"] = pipeline_json(echoed);
  j["lambda_hat"] = number_or_null(inf.lambda_hat);
  j["sigma_lambda_sq_hat"] = number_or_null(inf.sigma_lambda_sq_hat);
  j["lambda_interval"] = {number_or_null(inf.lambda_interval.lo),
                          number_or_null(inf.lambda_interval.hi)};
  j["classical_eigenvalue"] = number_or_null(r.classical_eigenvalue);
  j["support"] = support;
  j["diagnostics"] = {
      {"fantope",
       {{"iterations", r.fantope.iterations},
        {"converged", r.fantope.converged},
        {"primal_residual", number_or_null(r.fantope.primal_residual)},
        {"dual_residual", number_or_null(r.fantope.dual_residual)},
        {"objective", number_or_null(r.fantope.objective)},
        {"scale_clipped", r.initial.scale_clipped}}},
      {"second_step",
       {{"iterations", r.loadings.iterations},
        {"converged", r.loadings.converged},
        {"kkt_residual", number_or_null(r.loadings.kkt_residual)},
        {"fixed_point_residual", number_or_null(r.loadings.fixed_point_residual)},
        {"objective", number_or_null(r.loadings.objective)},
        {"l1_active", r.loadings.l1_active},
        {"l2_active", r.loadings.l2_active}}},
      {"nodewise",
       {{"converged_columns", nodewise_converged},
        {"boundary_columns", nodewise_boundary},
        {"max_iterations", nodewise_max_iter},
        {"max_kkt_residual", number_or_null(nodewise_kkt)}}}};
  write_text_file(join_path(dir, "summary.json"), dump_json(j));
}

}  // namespace despca
