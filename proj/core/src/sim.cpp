#include "cimpc/sim.hpp"

#include <cmath>

#include "cimpc/kinematics.hpp"

namespace cimpc {

VectorXd feedforward_torque(const SystemModel& model, const KinematicsState& kin,
                            const std::vector<ForceMeasurement>& F_ff) {
  const int n_r = model.n_r();
  VectorXd tau = VectorXd::Zero(n_r);
  for (const auto& f : F_ff) {
    const ContactInfo c = evaluate_pair(model, kin, f.pair);
    if (!c.robot_object()) continue;
    // robot witness Jacobian; the robot pushes with f on the object
    tau += c.J_rel.leftCols(n_r).transpose() * f.force_world;
  }
  return tau;
}

VectorXd pd_torque(const SystemModel& model, const VectorXd& q, const VectorXd& qdot,
                   const VectorXd& q_d, const VectorXd& qd_dot,
                   const std::vector<ForceMeasurement>& F_ff, const PdGains& gains) {
  const int n_r = model.n_r();
  require_size(q.size(), model.n_q(), "pd_torque q");
  require_size(qdot.size(), model.n_q(), "pd_torque qdot");
  require_size(q_d.size(), n_r, "pd_torque q_d");
  require_size(qd_dot.size(), n_r, "pd_torque qd_dot");
  VectorXd tau = gains.k_p * (q_d - q.head(n_r)) + gains.k_d * (qd_dot - qdot.head(n_r));
  if (!gains.gravity_comp && F_ff.empty()) return tau;
  const KinematicsState kin = forward_kinematics(model, q);
  if (gains.gravity_comp) tau -= gravity_forces(model, kin).head(n_r);
  if (!F_ff.empty()) tau += feedforward_torque(model, kin, F_ff);
  return tau;
}

void SimParams::validate() const {
  if (!(dt > 0.0)) throw ConfigError("sim dt must be positive");
  if (!(rotor_inertia > 0.0)) throw ConfigError("sim rotor_inertia must be positive");
  if (!(friction_v_reg > 0.0)) throw ConfigError("sim friction_v_reg must be positive");
  if (!(phi_max > 0.0)) throw ConfigError("sim phi_max must be positive");
  contact.validate();
}

Simulator::Simulator(const SystemModel& model, SimParams params)
    : model_(model), params_(params) {
  params_.validate();
  const int n_r = model.n_r();
  const int n_q = model.n_q();
  M_ = MatrixXd::Zero(n_q, n_q);
  M_.topLeftCorner(n_r, n_r).diagonal().setConstant(params_.rotor_inertia);
  M_.bottomRightCorner(model.n_o(), model.n_o()) = model.object_inertia();
  damping_ = VectorXd::Zero(n_q);
  damping_.tail(model.n_o()) = model.object_damping();
}

SimState Simulator::initial_state(const VectorXd& q) const {
  require_size(q.size(), model_.n_q(), "initial_state q");
  SimState s;
  s.q = q;
  s.qdot = VectorXd::Zero(q.size());
  s.contacts = evaluate_contacts(s.q, s.qdot);
  return s;
}

std::vector<SimContact> Simulator::evaluate_contacts(const VectorXd& q,
                                                     const VectorXd& qdot) const {
  const KinematicsState kin = forward_kinematics(model_, q);
  std::vector<SimContact> out;
  for (const ContactInfo& c : detect_contacts(model_, kin, params_.phi_max)) {
    SimContact sc;
    sc.pair = c.pair;
    sc.phi = c.phi;
    sc.normal = c.normal;
    const Vector3d v = c.J_rel * qdot;
    sc.phidot = c.normal.dot(v);
    sc.v_t = v - sc.phidot * c.normal;
    sc.f_n = normal_force(c.phi, sc.phidot, params_.contact);
    const double cf = c.mu * sc.f_n / std::max(sc.v_t.norm(), params_.friction_v_reg);
    sc.force_world = sc.f_n * c.normal - cf * sc.v_t;
    out.push_back(sc);
  }
  return out;
}

SimState Simulator::step(const SimState& s, const VectorXd& tau_r,
                         const VectorXd& tau_object) const {
  const int n_r = model_.n_r();
  require_size(tau_r.size(), n_r, "sim tau_r");
  const double dt = params_.dt;

  const KinematicsState kin = forward_kinematics(model_, s.q);
  const std::vector<ContactInfo> contacts = detect_contacts(model_, kin, params_.phi_max);

  VectorXd tau = gravity_forces(model_, kin);
  tau.head(n_r) += tau_r;
  if (tau_object.size() > 0) {
    require_size(tau_object.size(), model_.n_o(), "sim tau_object");
    tau.tail(model_.n_o()) += tau_object;
  }

  MatrixXd A = M_;
  A.diagonal() += dt * damping_;
  std::vector<double> coef(contacts.size(), 0.0);
  std::vector<double> fn(contacts.size(), 0.0);
  std::vector<double> phidot(contacts.size(), 0.0);
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    const ContactInfo& c = contacts[i];
    const Vector3d v = c.J_rel * s.qdot;
    phidot[i] = c.normal.dot(v);
    const Vector3d v_t = v - phidot[i] * c.normal;
    fn[i] = normal_force(c.phi, phidot[i], params_.contact);
    coef[i] = c.mu * fn[i] / std::max(v_t.norm(), params_.friction_v_reg);
    tau += c.J_rel.transpose() * (fn[i] * c.normal);
    const Matrix3d P = Matrix3d::Identity() - c.normal * c.normal.transpose();
    A += (dt * coef[i]) * c.J_rel.transpose() * P * c.J_rel;
  }

  const VectorXd rhs = M_ * s.qdot + dt * tau;
  SimState next;
  next.qdot = A.ldlt().solve(rhs);
  next.q = s.q + dt * next.qdot;
  next.t = s.t + dt;
  if (!next.q.allFinite() || !next.qdot.allFinite()) {
    throw SolverError("simulator state became non-finite at t = " + std::to_string(next.t));
  }

  next.contacts.reserve(contacts.size());
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    const ContactInfo& c = contacts[i];
    SimContact sc;
    sc.pair = c.pair;
    sc.phi = c.phi;
    sc.phidot = phidot[i];
    sc.normal = c.normal;
    sc.f_n = fn[i];
    const Vector3d v = c.J_rel * next.qdot;
    sc.v_t = v - c.normal.dot(v) * c.normal;
    sc.force_world = fn[i] * c.normal - coef[i] * sc.v_t;
    next.contacts.push_back(sc);
  }
  return next;
}

double Simulator::energy(const SimState& s) const {
  double e = 0.5 * s.qdot.dot(M_ * s.qdot);
  const KinematicsState kin = forward_kinematics(model_, s.q);
  for (const ContactInfo& c : detect_contacts(model_, kin, params_.phi_max)) {
    e += contact_potential(c.phi, params_.contact);
  }
  if (model_.gravity().squaredNorm() > 0.0) {
    for (int j = 0; j < model_.n_q(); ++j) {
      const Joint& jt = model_.joints()[j];
      if (jt.mass <= 0.0) continue;
      e -= jt.mass * model_.gravity().dot(kin.body[j] * jt.com);
    }
  }
  return e;
}

std::vector<ForceMeasurement> Simulator::measure(const SimState& s) const {
  std::vector<ForceMeasurement> out;
  for (const SimContact& c : s.contacts) {
    if (model_.role_of_frame(model_.geometries()[c.pair.a].frame) != BodyRole::Robot) continue;
    out.push_back({c.pair, -c.force_world});
  }
  return out;
}

}  // namespace cimpc
