#pragma once

#include <optional>
#include <vector>

#include "cimpc/ddp.hpp"

namespace cimpc {

/// Desired object motion. Relative mode ramps from the current object
/// configuration, q_o,ref(i) = q_o,now + rate h i. Absolute mode tracks
/// origin + rate (t - t_origin) regardless of where the object is.
struct ObjectCommand {
  VectorXd rate;
  bool absolute = false;
  VectorXd origin;
  double t_origin = 0.0;
};

struct MpcConfig {
  OcpConfig ocp;
  CqdcParams dynamics;  // h and kappa are overwritten from ocp
  MatrixXd W_o;
  MatrixXd W_r;
  MatrixXd W_u;
  VectorXd q_r_ref;
  double gamma_r = 5.0;
  int tail_knots = 3;
  ObjectCommand command;
};

struct MpcTiming {
  int step = 0;
  double t = 0.0;
  int iterations = 0;
  double solve_time = 0.0;
  double cost = 0.0;
  bool converged = false;
};

/// Object references over the horizon for a command at (q_o_now, t_now).
std::vector<VectorXd> object_reference(const ObjectCommand& cmd, const VectorXd& q_o_now,
                                       double t_now, int N, double h);

/// One receding-horizon solve. Without a warm start the controls start at zero;
/// otherwise the prior solution is shifted by the elapsed knots and its last
/// control repeated.
ReferenceTrajectory mpc_step(const SystemModel& model, const VectorXd& q_now, double t_now,
                             const MpcConfig& cfg, const ReferenceTrajectory* warm_start);

class Mpc {
 public:
  Mpc(const SystemModel& model, MpcConfig cfg);

  const ReferenceTrajectory& step(const VectorXd& q_now, double t_now);
  const std::optional<ReferenceTrajectory>& last() const { return last_; }
  const std::vector<MpcTiming>& timing() const { return timing_; }
  const MpcConfig& config() const { return cfg_; }
  void reset();

 private:
  const SystemModel& model_;
  MpcConfig cfg_;
  std::optional<ReferenceTrajectory> last_;
  std::vector<MpcTiming> timing_;
};

struct ForceReference {
  PairId pair;
  Vector3d force_world = Vector3d::Zero();  // robot on object
  double phi = 0.0;
};

struct InterpolatedReference {
  VectorXd q_d;
  VectorXd qd_dot;
  std::vector<ForceReference> forces;
  bool clamped = false;
};

/// Linear q_d over robot knots, knot finite-difference velocity, and
/// zero-order-hold forces. Times outside the horizon clamp and set `clamped`.
InterpolatedReference interpolate_references(const ReferenceTrajectory& traj, int n_r, double t);

}  // namespace cimpc
