#pragma once

#include "despca/experiment.hpp"
#include "despca/pipeline.hpp"

#include "json.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace despca {

/// git describe of the source tree at build time.
const char* version_string();

/// %.17g; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double v);

/// RFC-4180 writer: fields quoted when they contain a comma, quote, CR or
/// LF; records end with CRLF. Throws IoError naming the path.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  void row(const std::vector<std::string>& fields);
  void close();

 private:
  std::string path_;
  std::ofstream out_;
};

std::string csv_escape(const std::string& field);

/// Parses RFC-4180 text into records (quoted fields may span lines).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// One observation per row, numeric fields only. With `header` the first
/// record is skipped. Throws IoError for unreadable or malformed files.
DataMatrix read_data_csv(const std::string& path, bool header);

/// Indented JSON with every floating-point number written as %.17g and
/// non-finite numbers as null.
std::string dump_json(const nlohmann::json& value);

nlohmann::json config_json(const ExperimentConfig& config);
nlohmann::json report_json(const CoverageReport& report, const std::string& command);

/// Creates `dir` if needed. Throws IoError.
void ensure_directory(const std::string& dir);
void write_text_file(const std::string& path, const std::string& text);

/// coverage.csv, estimates.csv, eigen.csv, replications.csv, summary.json
void write_coverage_outputs(const CoverageReport& report, const std::string& dir,
                            const std::string& command);
/// lengths.csv plus the coverage outputs
void write_length_outputs(const CoverageReport& report, const std::string& dir);
/// hist_<method>.csv with columns coordinate, replication, value (1-based coordinate)
void export_histograms(const CoverageReport& report, const std::string& dir);

/// estimates.csv and summary.json for a single dataset.
void write_single_run(const PipelineReport& report, const PipelineConfig& config,
                      const std::string& input, Eigen::Index n, const std::string& dir);

}  // namespace despca
