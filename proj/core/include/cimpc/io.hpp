#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cimpc/closed_loop.hpp"
#include "cimpc/metrics.hpp"
#include "cimpc/scenario.hpp"

namespace cimpc {

/// Shortest decimal that round-trips the double.
std::string format_double(double x);

/// RFC 4180 field quoting.
std::string csv_escape(const std::string& field);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& fields);
  void row(const std::vector<double>& values);

 private:
  std::ofstream out_;
  std::size_t columns_;
  std::string path_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// Column index by name; throws Error when absent.
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

/// Column names of the run-log files, in order.
std::vector<std::string> trajectory_columns(int n_r, int n_o);
std::vector<std::string> contact_columns();
std::vector<std::string> controller_columns(int n_r);

/// Writes trajectory.csv, contacts.csv, controller.csv, mpc_timing.json,
/// metrics.json and manifest.json into dir (created if needed).
void write_run_log(const std::string& dir, const RunLog& log, const Scenario& sc,
                   const MetricsReport& metrics);

/// Inverse of write_run_log for the metric inputs.
RunLog read_run_log(const std::string& dir);

/// Planner-loop trajectory with per-pair phi columns.
void write_planner_log(const std::string& path, const PlannerLog& log);

/// Manifest common to every output directory.
nlohmann::json manifest(const Scenario& sc, const std::string& kind);

/// Output root from CIMPC_OUTPUT_ROOT, defaulting to ./runs.
std::string output_root();

}  // namespace cimpc
