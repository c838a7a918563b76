#pragma once

#include <optional>
#include <vector>

#include "cimpc/compliant.hpp"
#include "cimpc/mpc.hpp"

namespace cimpc {

enum class ObjectMode { Anchored, Free };

/// Low-level state [xi; xi_d; F_e]. F_e stacks the forces the robot exerts on
/// the object, in each contact's frame (tx, ty, n).
struct TrackingState {
  VectorXd xi;
  VectorXd xi_d;
  VectorXd F_e;
  VectorXd stacked() const;
};

struct LinearPlant {
  MatrixXd A;
  MatrixXd B;
  MatrixXd Ad;
  MatrixXd Bd;
  MatrixXd force_operator;  // I + M J'/k_p (+ N K_o^-1 G'), inverted into Gamma
  MatrixXd force_gain;      // Gamma, with dF/dt = Gamma u
  double k_p = 0.0;
  double k_d = 0.0;
  double dt = 0.01;
  int n_r = 0;
  StiffnessSet stiffness;

  int n_c() const { return stiffness.size(); }
  int n_x() const { return 2 * n_r + 3 * n_c(); }
};

/// Continuous model
///   d xi/dt   = u + (k_p (xi_d - xi) - J' F) / k_d
///   d xi_d/dt = u
///   d F/dt    = (I + M J'/k_p + N (K_o + eps I)^-1 G')^-1 M u
/// with the K_o term dropped for anchored objects; forward Euler at dt.
LinearPlant assemble_plant(const StiffnessSet& stiffness, int n_r, double k_p, double k_d,
                           ObjectMode mode, double dt);

struct TrackingWeights {
  double w_xi = 10.0;
  double w_F = 0.1;
  double w_u = 1e-3;
  double terminal_scale = 5.0;
};

/// References over the low-level horizon. xi_ref and F_ref have N + 1
/// entries, u_ref has N. F_weight scales W_F per force row (masking).
struct TrackingReference {
  std::vector<VectorXd> xi_ref;
  std::vector<VectorXd> F_ref;
  std::vector<VectorXd> u_ref;
  VectorXd F_weight;
};

struct TrackingSolution {
  std::vector<VectorXd> U;
  std::vector<VectorXd> X;
  double cost = 0.0;
};

/// Exact finite-horizon LQ tracking by backward Riccati recursion with affine terms.
TrackingSolution tracking_solve(const TrackingState& x0, const LinearPlant& plant,
                                const TrackingReference& ref, const TrackingWeights& w);

/// Cost of a control sequence on the discretized plant.
double tracking_cost(const VectorXd& x0, const LinearPlant& plant, const TrackingReference& ref,
                     const TrackingWeights& w, const std::vector<VectorXd>& U,
                     std::vector<VectorXd>* X = nullptr);

/// Per-step state and control weights (diagonal) used by tracking_solve.
VectorXd tracking_state_weight(const LinearPlant& plant, const TrackingReference& ref,
                               const TrackingWeights& w, bool terminal);

/// Contact force reading from the plant or a sensor: force on the object by the robot.
struct ForceMeasurement {
  PairId pair;
  Vector3d force_world = Vector3d::Zero();
};

struct ControllerConfig {
  double k_p = 10.0;
  double k_d = 0.2;
  double dt = 0.01;
  int N = 10;
  TrackingWeights weights;
  CompliantParams contact;
  ObjectMode object_mode = ObjectMode::Anchored;
  double phi_max = 0.02;
  double measured_threshold = 0.01;  // N, normal force counting as "in contact"
  double planned_threshold = 0.01;   // N
  double unplanned_weight = 0.01;    // W_F multiplier for measured but unplanned contacts
};

struct ControllerOutput {
  VectorXd q_d;
  VectorXd qd_dot;
  std::vector<ForceMeasurement> F_ff;  // planned force per pair, robot on object
  VectorXd u0;
  std::vector<PairId> pairs;
  bool held = false;  // no reference was available, nominal held
  double solve_time = 0.0;
  double force_gain_cond = 0.0;
};

/// Receding-horizon compliance controller. Owns the nominal xi_d.
class ContactController {
 public:
  ContactController(const SystemModel& model, ControllerConfig cfg);

  ControllerOutput step(const VectorXd& q, const std::vector<ForceMeasurement>& measured,
                        const ReferenceTrajectory* refs, double t);

  const VectorXd& nominal() const { return xi_d_; }
  void reset(const VectorXd& xi_d) { xi_d_ = xi_d; }

 private:
  const SystemModel& model_;
  ControllerConfig cfg_;
  VectorXd xi_d_;
};

}  // namespace cimpc
