#include "despca/error.hpp"
#include "despca/experiment.hpp"
#include "despca/pipeline.hpp"
#include "despca/report.hpp"
#include "despca/verify.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum Exit { ok = 0, config_error = 2, numerical_failure = 3, io_error = 4 };

// Flags are collected as strings and applied through apply_setting after
// the config file, so both paths share one parser.
struct ExperimentFlags {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> settings;
  std::vector<std::string> extra;
};

void add_setting_flag(CLI::App* app, ExperimentFlags& f, const std::string& flag,
                      const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&f, key](const std::string& v) { f.settings.emplace_back(key, v); }, help);
}

void add_experiment_flags(CLI::App* app, ExperimentFlags& f) {
  app->add_option("--config", f.config_file, "key = value config file");
  add_setting_flag(app, f, "--model", "model", "1, 2 or custom (spikes from the config file)");
  add_setting_flag(app, f, "--p", "p", "dimension");
  add_setting_flag(app, f, "--n", "n", "sample size");
  add_setting_flag(app, f, "--reps", "reps", "number of replications N");
  add_setting_flag(app, f, "--seed", "seed", "base seed; replication r uses seed + r");
  add_setting_flag(app, f, "--variance", "variance", "known or estimated");
  add_setting_flag(app, f, "--level", "level", "confidence level");
  add_setting_flag(app, f, "--out", "out", "output directory");
  add_setting_flag(app, f, "--threads", "threads", "worker threads for replications");
  add_setting_flag(app, f, "--methods", "methods", "debiased,classical");
  add_setting_flag(app, f, "--coordinates", "coordinates", "1-based, e.g. 1-9 or 1,3,5");
  app->add_option("--set", f.extra, "extra key=value setting (repeatable)");
}

despca::ExperimentConfig build_config(const ExperimentFlags& f) {
  despca::ExperimentConfig c;
  if (!f.config_file.empty()) despca::load_config_file(c, f.config_file);
  for (const auto& [k, v] : f.settings) despca::apply_setting(c, k, v);
  for (const std::string& kv : f.extra) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw despca::ConfigError("--set expects key=value, got '" + kv + "'");
    despca::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  despca::validate(c);
  return c;
}

void print_methods(const despca::CoverageReport& r) {
  std::printf("completed %d, failed %d\n", r.completed, r.failed);
  for (const despca::MethodSummary& m : r.methods) {
    std::printf("%-10s coverage S0 %.4f S0c %.4f | length S0 %.4f S0c %.4f | eigen cov %.4f\n",
                m.name.c_str(), m.coverage_support, m.coverage_complement, m.length_support,
                m.length_complement, m.eigen_coverage);
  }
  std::printf("efficient  length S0 %.4f S0c %.4f\n", r.efficient_support, r.efficient_complement);
}

int run_selftest(std::uint64_t seed) {
  bool all = true;
  auto show = [&](const std::vector<despca::CheckResult>& results) {
    for (const despca::CheckResult& r : results) {
      std::printf("%s  %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                  despca::describe(r).c_str());
      all = all && r.passed;
    }
  };
  show(despca::oracle_suite(seed));
  show(despca::property_suite(seed + 1));
  show(despca::kkt_suite(seed + 2));
  return all ? ok : numerical_failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"De-biased sparse PCA: single runs and coverage simulations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(despca::version_string()));

  ExperimentFlags cov_flags;
  ExperimentFlags len_flags;
  ExperimentFlags hist_flags;
  auto* coverage = app.add_subcommand("coverage", "coverage experiment over seeded replications");
  add_experiment_flags(coverage, cov_flags);
  auto* ci_length = app.add_subcommand("ci-length", "average interval lengths, estimated variances");
  add_experiment_flags(ci_length, len_flags);
  auto* histograms = app.add_subcommand("histograms", "normalized estimates for histograms");
  add_experiment_flags(histograms, hist_flags);

  auto* run_one = app.add_subcommand("run-one", "run the pipeline on one CSV dataset");
  std::string input;
  bool header = false;
  ExperimentFlags one_flags;
  run_one->add_option("input", input, "CSV file, one observation per row")->required();
  run_one->add_flag("--header", header, "skip the first line");
  run_one->add_option("--config", one_flags.config_file, "key = value config file");
  add_setting_flag(run_one, one_flags, "--level", "level", "confidence level");
  add_setting_flag(run_one, one_flags, "--out", "out", "output directory");
  run_one->add_option("--set", one_flags.extra, "extra key=value setting (repeatable)");

  auto* selftest = app.add_subcommand("selftest", "run the invariant and oracle suites");
  std::uint64_t selftest_seed = 20240601;
  selftest->add_option("--seed", selftest_seed, "seed for the random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (coverage->parsed() || ci_length->parsed() || histograms->parsed()) {
      const ExperimentFlags& f = coverage->parsed() ? cov_flags
                                 : ci_length->parsed() ? len_flags
                                                       : hist_flags;
      const despca::ExperimentConfig config = build_config(f);
      if (coverage->parsed()) {
        const despca::CoverageReport r = despca::run_coverage(config);
        despca::write_coverage_outputs(r, config.out_dir, "coverage");
        print_methods(r);
      } else if (ci_length->parsed()) {
        const despca::CoverageReport r = despca::run_ci_length(config);
        despca::write_length_outputs(r, config.out_dir);
        print_methods(r);
      } else {
        const despca::CoverageReport r = despca::run_coverage(config);
        despca::export_histograms(r, config.out_dir);
        print_methods(r);
      }
      std::printf("wrote %s\n", config.out_dir.c_str());
      return ok;
    }
    if (run_one->parsed()) {
      const despca::DataMatrix x = despca::read_data_csv(input, header);
      despca::ExperimentConfig c;
      if (!one_flags.config_file.empty()) despca::load_config_file(c, one_flags.config_file);
      for (const auto& [k, v] : one_flags.settings) despca::apply_setting(c, k, v);
      for (const std::string& kv : one_flags.extra) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
          throw despca::ConfigError("--set expects key=value, got '" + kv + "'");
        }
        despca::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
      }
      const despca::PipelineConfig pc = despca::resolve_pipeline(c.overrides, c.level, x.p(), x.n());
      const despca::PipelineReport r = despca::run_pipeline(x, pc);
      despca::write_single_run(r, pc, input, x.n(), c.out_dir);
      std::printf("n %lld p %lld lambda_hat %.6f [%.6f, %.6f], support size %zu\n",
                  static_cast<long long>(x.n()), static_cast<long long>(x.p()),
                  r.inference.lambda_hat, r.inference.lambda_interval.lo,
                  r.inference.lambda_interval.hi, r.inference.support.size());
      std::printf("stage seconds: covariance %.3f fantope %.3f second_step %.3f nodewise %.3f "
                  "inference %.3f\n",
                  r.timings.covariance, r.timings.fantope, r.timings.second_step,
                  r.timings.nodewise, r.timings.inference);
      std::printf("wrote %s\n", c.out_dir.c_str());
      return ok;
    }
    if (selftest->parsed()) return run_selftest(selftest_seed);
  } catch (const despca::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const despca::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return config_error;
  } catch (const despca::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return io_error;
  } catch (const despca::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return numerical_failure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return numerical_failure;
  }
  return ok;
}
