#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "despca/error.hpp"
#include "despca/experiment.hpp"
#include "despca/report.hpp"
#include "helpers.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace despca;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("despca_test_experiment_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void put(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// plain comma split; the files checked here have no quoted fields
std::vector<std::vector<std::string>> simple_rows(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.model = 2;
  c.p = 20;
  c.n = 60;
  c.reps = 6;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("settings are parsed and validated") {
  ExperimentConfig c;
  apply_setting(c, "model", "1");
  apply_setting(c, " P ", " 50 ");
  apply_setting(c, "n", "400");
  apply_setting(c, "reps", "7");
  apply_setting(c, "seed", "123");
  apply_setting(c, "variance", "estimated");
  apply_setting(c, "methods", "debiased");
  apply_setting(c, "coordinates", "1-3,7");
  apply_setting(c, "level", "0.9");
  apply_setting(c, "threads", "2");
  apply_setting(c, "T_j", "3.5");
  apply_setting(c, "lambda", "0.2");
  CHECK(c.model == 1);
  CHECK(c.p == 50);
  CHECK(c.n == 400);
  CHECK(c.reps == 7);
  CHECK(c.seed == 123);
  CHECK(c.variance == VarianceMode::estimated);
  CHECK(c.run_debiased);
  CHECK_FALSE(c.run_classical);
  CHECK(c.coordinates == std::vector<Eigen::Index>{1, 2, 3, 7});
  CHECK(c.level == 0.9);
  CHECK(c.threads == 2);
  CHECK(*c.overrides.nodewise_budget == 3.5);
  CHECK(*c.overrides.lambda == 0.2);
  validate(c);
  const PipelineConfig pc = resolve_pipeline(c.overrides, c.level, c.p, c.n);
  CHECK(pc.lambda == 0.2);
  CHECK(pc.nodewise_budget == 3.5);
  CHECK(pc.level == 0.9);
  CHECK(report_coordinates(c) == std::vector<Eigen::Index>{0, 1, 2, 6});

  CHECK_THROWS_AS(apply_setting(c, "variance", "guess"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "reps", "0"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "p", "abc"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "bogus", "1"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "model", "3"), ConfigError);
  apply_setting(c, "coordinates", "60");
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("config files") {
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  put(dir / "good.cfg", "# comment line\nmodel = 2\np = 30   # trailing\n\nn=90\nreps = 3\n");
  ExperimentConfig c;
  load_config_file(c, (dir / "good.cfg").string());
  CHECK(c.p == 30);
  CHECK(c.n == 90);
  CHECK(c.reps == 3);

  put(dir / "bad.cfg", "p = 30\nn = 90\nthis line is wrong\n");
  try {
    load_config_file(c, (dir / "bad.cfg").string());
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  put(dir / "unknown.cfg", "colour = blue\n");
  CHECK_THROWS_AS(load_config_file(c, (dir / "unknown.cfg").string()), ConfigError);
  CHECK_THROWS_AS(load_config_file(c, (dir / "missing.cfg").string()), IoError);
}

TEST_CASE("custom spiked model from settings") {
  ExperimentConfig c;
  apply_setting(c, "model", "custom");
  apply_setting(c, "p", "10");
  apply_setting(c, "spike", "2.0 1:1 2:1");
  validate(c);
  const SpikedModel m = build_experiment_model(c);
  CHECK(m.lambda_max() == doctest::Approx(5.0));
  CHECK(m.support() == std::vector<Eigen::Index>{0, 1});
}

TEST_CASE("single replication gives 0/1 coverages") {
  ExperimentConfig c = small_config();
  c.reps = 1;
  const CoverageReport r = run_coverage(c);
  CHECK(r.completed + r.failed == 1);
  for (const MethodSummary& m : r.methods) {
    for (double v : m.coverage) CHECK((v == 0.0 || v == 1.0));
  }
}

TEST_CASE("report aggregates are consistent with the exported estimates") {
  ExperimentConfig c = small_config();
  const CoverageReport r = run_coverage(c);
  const fs::path dir = scratch("consistency");
  write_coverage_outputs(r, dir.string(), "coverage");

  // per (method, coordinate): hits and count from estimates.csv
  std::map<std::pair<std::string, int>, std::pair<int, int>> tally;
  const auto est = simple_rows(dir / "estimates.csv");
  REQUIRE(est.size() == 1 + 2 * static_cast<std::size_t>(r.completed * c.p));
  for (std::size_t i = 1; i < est.size(); ++i) {
    auto& t = tally[{est[i][0], std::stoi(est[i][2])}];
    t.first += est[i][8] == "1";
    t.second += 1;
  }
  const auto cov = simple_rows(dir / "coverage.csv");
  std::map<std::string, std::pair<double, int>> on, off;
  for (std::size_t i = 1; i < cov.size(); ++i) {
    const auto& t = tally[{cov[i][0], std::stoi(cov[i][1])}];
    const double recomputed = double(t.first) / double(t.second);
    CHECK(std::stod(cov[i][3]) == doctest::Approx(recomputed).epsilon(1e-15));
    auto& bucket = (cov[i][2] == "1" ? on : off)[cov[i][0]];
    bucket.first += recomputed;
    bucket.second += 1;
  }
  const nlohmann::json summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  for (const auto& [name, acc] : on) {
    CHECK(summary["methods"][name]["coverage_support"].get<double>() ==
          doctest::Approx(acc.first / acc.second).epsilon(1e-14));
  }
  for (const auto& [name, acc] : off) {
    CHECK(summary["methods"][name]["coverage_complement"].get<double>() ==
          doctest::Approx(acc.first / acc.second).epsilon(1e-14));
  }
  CHECK(summary["config"]["p"] == 20);
  CHECK(summary["version"].get<std::string>() == version_string());
  CHECK(summary["completed"] == r.completed);
}

TEST_CASE("identical configs give byte-identical outputs for any thread count") {
  ExperimentConfig c = small_config();
  c.threads = 1;
  const CoverageReport a = run_coverage(c);
  c.threads = 3;
  const CoverageReport b = run_coverage(c);
  const fs::path da = scratch("det_a"), db = scratch("det_b");
  write_length_outputs(a, da.string());
  write_length_outputs(b, db.string());
  for (const char* f : {"coverage.csv", "estimates.csv", "eigen.csv", "replications.csv",
                        "lengths.csv", "summary.json"}) {
    CHECK_MESSAGE(slurp(da / f) == slurp(db / f), f);
  }
}

TEST_CASE("dropping the classical method leaves de-biased numbers unchanged") {
  ExperimentConfig both = small_config();
  ExperimentConfig only = both;
  only.run_classical = false;
  const CoverageReport a = run_coverage(both);
  const CoverageReport b = run_coverage(only);
  REQUIRE(b.methods.size() == 1);
  const MethodSummary& ma = a.methods[0];
  const MethodSummary& mb = b.methods[0];
  CHECK(ma.name == "debiased");
  CHECK(mb.name == "debiased");
  CHECK(ma.coverage == mb.coverage);
  CHECK(ma.mean_length == mb.mean_length);
  CHECK(ma.normalized == mb.normalized);
  CHECK(ma.pivot_mean == mb.pivot_mean);
  for (std::size_t i = 0; i < a.replications.size(); ++i) {
    CHECK(a.replications[i].debiased.estimate == b.replications[i].debiased.estimate);
  }
}

TEST_CASE("histogram export") {
  ExperimentConfig c = small_config();
  c.reps = 4;
  const CoverageReport r = run_coverage(c);
  const fs::path dir = scratch("hist");
  export_histograms(r, dir.string());
  for (const char* f : {"hist_debiased.csv", "hist_classical.csv"}) {
    const auto rows = simple_rows(dir / f);
    REQUIRE(!rows.empty());
    CHECK(rows[0] == std::vector<std::string>{"coordinate", "replication", "value"});
    CHECK(rows.size() == 1 + static_cast<std::size_t>(r.completed) * 9);
  }

  CoverageReport empty;
  empty.config = c;
  MethodSummary m;
  m.name = "debiased";
  m.normalized.assign(9, {});
  empty.methods.push_back(m);
  const fs::path edir = scratch("hist_empty");
  export_histograms(empty, edir.string());
  CHECK(slurp(edir / "hist_debiased.csv") == "coordinate,replication,value\r\n");
}

TEST_CASE("zero standard deviations give zero lengths and a valid report") {
  ExperimentConfig c = small_config();
  c.variance = VarianceMode::estimated;
  const SpikedModel model = build_experiment_model(c);
  const TrueVariances truth = true_variances(model);
  std::vector<Replication> reps;
  for (int i = 0; i < 5; ++i) {
    Replication rec;
    rec.index = i;
    rec.ok = true;
    for (MethodEstimate* e : {&rec.debiased, &rec.classical}) {
      e->estimate = model.beta0;
      e->sd = Eigen::VectorXd::Zero(c.p);
      e->eigenvalue = model.lambda_max();
      e->eigen_sd = 0.0;
    }
    reps.push_back(rec);
  }
  const CoverageReport r = summarize(c, model, truth, reps);
  for (const MethodSummary& m : r.methods) {
    CHECK(m.length_support == 0.0);
    CHECK(m.length_complement == 0.0);
    CHECK(m.eigen_length == 0.0);
    CHECK(m.coverage_support == 1.0);
  }
  const fs::path dir = scratch("zero_sd");
  write_length_outputs(r, dir.string());
  CHECK(fs::exists(dir / "lengths.csv"));
  CHECK_NOTHROW((void)nlohmann::json::parse(slurp(dir / "summary.json")));
}

TEST_CASE("failed replications are counted and too many abort") {
  ExperimentConfig c = small_config();
  const SpikedModel model = build_experiment_model(c);
  const TrueVariances truth = true_variances(model);
  auto make = [&](int failures) {
    std::vector<Replication> reps;
    for (int i = 0; i < 10; ++i) {
      Replication rec;
      rec.index = 9 - i;
      rec.ok = i >= failures;
      rec.error = rec.ok ? "" : "[nodewise] degenerate";
      for (MethodEstimate* e : {&rec.debiased, &rec.classical}) {
        e->estimate = model.beta0;
        e->sd = Eigen::VectorXd::Ones(c.p);
        e->eigenvalue = model.lambda_max();
        e->eigen_sd = 1.0;
      }
      reps.push_back(rec);
    }
    return reps;
  };
  const CoverageReport r = summarize(c, model, truth, make(1));
  CHECK(r.completed == 9);
  CHECK(r.failed == 1);
  CHECK(r.replications.front().index == 0);
  const nlohmann::json j = report_json(r, "coverage");
  CHECK(j["failures"].size() == 1);
  CHECK(j["failures"][0]["replication"] == 9);
  CHECK_THROWS_AS(summarize(c, model, truth, make(2)), NumericalError);
}

TEST_CASE("JSON numbers carry 17 significant digits") {
  const std::string text = dump_json(nlohmann::json{{"a", 0.1}, {"b", std::nan("")}, {"c", 3}});
  CHECK(text.find("0.10000000000000001") != std::string::npos);
  CHECK(text.find("null") != std::string::npos);
  CHECK(nlohmann::json::parse(text)["a"].get<double>() == 0.1);
  CHECK(format_number(1.0 / 3.0) == "0.33333333333333331");
}

TEST_CASE("RFC-4180 quoting round trip") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  const fs::path dir = scratch("csv");
  fs::create_directories(dir);
  {
    CsvWriter w((dir / "t.csv").string());
    w.row({"x", "a,b", "line\nbreak", "q\"uote"});
    w.row({"1", "", "3", "4"});
    w.close();
  }
  const auto rows = parse_csv(slurp(dir / "t.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"x", "a,b", "line\nbreak", "q\"uote"});
  CHECK(rows[1] == std::vector<std::string>{"1", "", "3", "4"});
  CHECK_THROWS_AS(CsvWriter((dir / "no_such_dir" / "t.csv").string()), IoError);
}

TEST_CASE("reading data files") {
  const fs::path dir = scratch("data");
  fs::create_directories(dir);
  put(dir / "plain.csv", "1,2,3\r\n4,5,6\n-1e-3,0,7.5\n");
  const DataMatrix x = read_data_csv((dir / "plain.csv").string(), false);
  CHECK(x.n() == 3);
  CHECK(x.p() == 3);
  CHECK(x.rows()(2, 0) == -1e-3);
  put(dir / "header.csv", "a,b\n1,2\n3,4\n");
  const DataMatrix h = read_data_csv((dir / "header.csv").string(), true);
  CHECK(h.n() == 2);
  CHECK(h.rows()(1, 1) == 4.0);
  CHECK_THROWS_AS(read_data_csv((dir / "header.csv").string(), false), IoError);
  put(dir / "ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(read_data_csv((dir / "ragged.csv").string(), false), IoError);
  put(dir / "single.csv", "1\n2\n");
  CHECK_THROWS_AS(read_data_csv((dir / "single.csv").string(), false), IoError);
  CHECK_THROWS_AS(read_data_csv((dir / "absent.csv").string(), false), IoError);
}

TEST_CASE("pseudo-inverse of a singular matrix") {
  Eigen::VectorXd v(3);
  v << 1.0, 2.0, 2.0;
  const SymmetricMatrix a(Eigen::MatrixXd(v * v.transpose()));
  const Eigen::MatrixXd pinv = pseudo_inverse(a);
  CHECK(testing_support::max_abs(pinv - v * v.transpose() / 81.0) <= 1e-14);
  CHECK(testing_support::max_abs(a.matrix() * pinv * a.matrix() - a.matrix()) <= 1e-12);
}
