#pragma once

#include <vector>

#include "cimpc/compliant.hpp"
#include "cimpc/contact.hpp"
#include "cimpc/model.hpp"
#include "cimpc/tracking.hpp"

namespace cimpc {

struct PdGains {
  double k_p = 10.0;
  double k_d = 0.2;
  bool gravity_comp = true;
};

/// Joint PD with gravity compensation and feed-forward contact forces,
///   tau = tau_g + k_p (q_d - q) + k_d (qd_dot - q_dot) + J' F_ff,
/// where F_ff are forces the robot should exert on the object (world frame)
/// and J the robot witness Jacobians at the current configuration.
VectorXd pd_torque(const SystemModel& model, const VectorXd& q, const VectorXd& qdot,
                   const VectorXd& q_d, const VectorXd& qd_dot,
                   const std::vector<ForceMeasurement>& F_ff, const PdGains& gains);

/// J' F_ff alone, on robot joints.
VectorXd feedforward_torque(const SystemModel& model, const KinematicsState& kin,
                            const std::vector<ForceMeasurement>& F_ff);

struct SimParams {
  double dt = 5e-4;
  double rotor_inertia = 1e-3;  // per robot joint
  CompliantParams contact{2e-4, 5000.0, 0.1, 0.3, true};
  double friction_v_reg = 1e-4;  // m/s
  double phi_max = 0.02;
  void validate() const;
};

/// Penalty-law contact as seen by the simulator.
struct SimContact {
  PairId pair;
  double phi = 0.0;
  double phidot = 0.0;
  Vector3d normal = Vector3d::UnitZ();
  Vector3d force_world = Vector3d::Zero();  // on geometry a (robot or object)
  Vector3d v_t = Vector3d::Zero();          // tangential relative velocity
  double f_n = 0.0;
};

struct SimState {
  VectorXd q;
  VectorXd qdot;
  double t = 0.0;
  std::vector<SimContact> contacts;  // evaluated at the start of the last step
};

/// Second-order semi-implicit Euler plant with compliant normal contact and
/// regularized Coulomb friction. Damping and friction are treated
/// linearly-implicitly in the velocity update.
class Simulator {
 public:
  Simulator(const SystemModel& model, SimParams params);

  SimState initial_state(const VectorXd& q) const;

  /// Advance one step with joint torques tau_r and an optional generalized
  /// force on the object DOFs.
  SimState step(const SimState& s, const VectorXd& tau_r,
                const VectorXd& tau_object = VectorXd()) const;

  /// Contacts and penalty forces at (q, qdot).
  std::vector<SimContact> evaluate_contacts(const VectorXd& q, const VectorXd& qdot) const;

  /// Kinetic energy plus contact and gravity potentials.
  double energy(const SimState& s) const;

  /// Robot-on-object forces of robot-object contacts, for the controller.
  std::vector<ForceMeasurement> measure(const SimState& s) const;

  const MatrixXd& mass_matrix() const { return M_; }
  const SimParams& params() const { return params_; }

 private:
  const SystemModel& model_;
  SimParams params_;
  MatrixXd M_;
  VectorXd damping_;
};

}  // namespace cimpc
