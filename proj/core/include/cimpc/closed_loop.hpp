#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cimpc/mpc.hpp"
#include "cimpc/sim.hpp"
#include "cimpc/tracking.hpp"

namespace cimpc {

enum class ControllerKind { Ours, OpenLoop, FfTorque, FfPos };

std::string to_string(ControllerKind kind);
ControllerKind controller_kind_from_string(const std::string& s);

struct RateConfig {
  double mpc_hz = 20.0;
  double control_hz = 100.0;
  double sim_hz = 2000.0;
  /// Throws ConfigError unless sim | control | MPC divide evenly.
  void validate() const;
  int control_every() const;  // sim steps per controller call
  int mpc_every() const;      // sim steps per MPC call
};

/// Generalized impulse on the object DOFs (N s or N m s) at time t.
struct Disturbance {
  double t = 0.0;
  VectorXd impulse;
};

struct ClosedLoopConfig {
  RateConfig rates;
  SimParams sim;
  PdGains pd;
  ControllerConfig controller;
  MpcConfig mpc;
  std::vector<Disturbance> disturbances;
  double k_ctrl = 10.0;  // position gain used by ff_pos
};

/// One contact observation at a controller tick.
struct ContactSample {
  int tick = 0;
  double t = 0.0;
  PairId pair;
  double phi = 0.0;
  double slip_sq = 0.0;  // |J_t qdot|^2, relative tangential speed squared
  Vector3d f_measured = Vector3d::Zero();  // robot on object, world
  Vector3d f_ref = Vector3d::Zero();       // planned, robot on object, world
};

struct RunLog {
  std::string kind;
  int n_r = 0;
  int n_o = 0;
  double dt_sim = 0.0;
  // controller-rate signals
  std::vector<double> t;
  std::vector<VectorXd> q;
  std::vector<VectorXd> qdot;
  std::vector<VectorXd> q_d;
  std::vector<VectorXd> qd_dot;
  std::vector<VectorXd> q_o_ref;
  std::vector<VectorXd> u0;
  std::vector<double> ctrl_solve_time;
  std::vector<ContactSample> contacts;
  std::vector<MpcTiming> mpc;
  // scheduling counters
  long sim_steps = 0;
  std::vector<long> ctrl_at;  // sim step index of each controller call
  std::vector<long> mpc_at;
  bool aborted = false;
  std::string abort_reason;
  double wall_time = 0.0;
};

/// Multi-rate loop: MPC on the planning model, the chosen controller at the
/// control rate, PD and the verification simulator at the sim rate. A
/// failure during the run sets `aborted` and returns the partial log.
RunLog run_closed_loop(const SystemModel& model, const ClosedLoopConfig& cfg,
                       ControllerKind kind, const VectorXd& q0, double duration);

/// MPC closed around the CQDC model itself, one plant step per knot.
struct PlannerLog {
  std::vector<double> t;
  std::vector<VectorXd> q;        // steps + 1 states
  std::vector<VectorXd> u;        // applied first controls
  std::vector<VectorXd> q_o_ref;  // command at each state
  std::vector<std::vector<double>> phi;  // robot-object distance per candidate pair
  std::vector<PairId> pairs;
  std::vector<MpcTiming> mpc;
  std::vector<std::vector<double>> cost_traces;
  std::vector<double> prediction_error;  // |X_1 - realized q|, inf-norm
  bool aborted = false;
  std::string abort_reason;
};

/// Hook applied to the state before each MPC step (step index, q in/out).
using StateHook = std::function<void(int, VectorXd&)>;

PlannerLog run_planner_loop(const SystemModel& model, const MpcConfig& cfg, const VectorXd& q0,
                            int steps, const StateHook& hook = nullptr);

}  // namespace cimpc
