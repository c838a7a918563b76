#pragma once

#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "cimpc/closed_loop.hpp"
#include "cimpc/scenario.hpp"

namespace cimpc {

/// Logistic function, evaluated without overflow.
double sigmoid(double x);

struct SlippageResult {
  double value = 0.0;
  long samples = 0;
  bool empty = true;  // no sample passed the gate; value is 0
};

/// Mean of sigmoid(c phi) |J_t qdot|^2 over samples with phi < gate.
SlippageResult slippage_metric(const std::vector<ContactSample>& samples, double c, double gate);

struct ContactInterval {
  PairId pair;
  double t_start = 0.0;
  double t_end = 0.0;
};

struct ContactTimeline {
  std::vector<PairId> pairs;
  std::vector<ContactInterval> intervals;
  std::vector<int> breaks;  // per pair, phi crossing the threshold upward
};

/// phi[k][p] is the distance of pairs[p] at t[k]; missing samples are +inf.
ContactTimeline contact_timeline(const std::vector<double>& t,
                                 const std::vector<std::vector<double>>& phi,
                                 const std::vector<PairId>& pairs, double threshold);

struct MetricsReport {
  SlippageResult slippage;
  double avg_rotation_speed = 0.0;  // rad/s of the last object coordinate
  double avg_joint_speed = 0.0;     // rad/s, mean |qdot_r|
  double joint_tracking_rms = 0.0;  // rad, q_r against q_d
  double object_tracking_mean = 0.0;  // mean |q_o,last - reference|
  ContactTimeline timeline;
  double mpc_solve_mean = 0.0;
  double mpc_solve_max = 0.0;
  double ctrl_solve_mean = 0.0;
  double ctrl_solve_max = 0.0;
  double wall_time = 0.0;
  bool aborted = false;
};

MetricsReport compute_metrics(const RunLog& log, const MetricsConfig& cfg);
MetricsReport compute_metrics(const PlannerLog& log, const MetricsConfig& cfg);

nlohmann::json to_json(const MetricsReport& r);

/// Per-step |q_o,last - reference| of a planner log.
std::vector<double> object_tracking_error(const PlannerLog& log);

}  // namespace cimpc
