#pragma once

#include <string>
#include <vector>

#include "cimpc/closed_loop.hpp"
#include "cimpc/metrics.hpp"
#include "cimpc/scenario.hpp"

namespace cimpc {

// Each driver writes its files under out_dir when it is non-empty.

struct KappaSweepResult {
  std::vector<double> kappas;
  std::vector<double> rotation_speed;
  std::vector<PlannerLog> logs;
};
KappaSweepResult run_kappa_sweep(const Scenario& sc, const std::string& out_dir = "");

struct GaitResult {
  PlannerLog log;
  MetricsReport metrics;
};
GaitResult run_gait(const Scenario& sc, const std::string& out_dir = "");

struct CompareRow {
  ControllerKind kind = ControllerKind::Ours;
  MetricsReport metrics;
  RunLog log;
};
std::vector<CompareRow> run_controller_compare(const Scenario& sc,
                                               const std::string& out_dir = "");

struct RobustnessRun {
  double magnitude = 0.0;
  int seed = 0;
  std::vector<double> error;  // |yaw error| from the disturbed state onward
  double mean_error = 0.0;
  bool recovered = false;  // final error below the recovery threshold
  bool failed = false;
  std::string reason;
};

struct RobustnessResult {
  std::vector<double> magnitudes;
  std::vector<double> mean_error;          // per magnitude, over seeds and steps
  std::vector<double> recovered_fraction;  // per magnitude
  std::vector<std::vector<double>> curve_mean;  // per magnitude, per step
  std::vector<std::vector<double>> curve_std;
  std::vector<RobustnessRun> runs;
};

/// Yaw (and proportional planar translation) perturbation applied once to the
/// object after settle_steps, seeded per run; error against an absolute command.
RobustnessRun robustness_run(const Scenario& sc, double magnitude, int seed_index);
RobustnessResult run_robustness(const Scenario& sc, const std::string& out_dir = "");

/// Dispatch by name; returns a JSON summary. Throws ConfigError on unknown names.
nlohmann::json run_experiment(const std::string& name, const Scenario& sc,
                              const std::string& out_dir);

}  // namespace cimpc
