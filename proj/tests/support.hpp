#pragma once

#include <array>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <cimpc/cimpc.hpp>

namespace cimpc::test {

inline std::string scenario_path(const std::string& file) {
  return std::string(CIMPC_TEST_SCENARIO_DIR) + "/" + file;
}

inline SystemModel rotz_model() { return load_model(scenario_path("planar_rotz_model.json")); }
inline SystemModel free_model() { return load_model(scenario_path("planar_free_model.json")); }

/// Nominal grasp of the planar scenarios: every finger about 10 mm from the disk.
inline VectorXd nominal_q(const SystemModel& m) {
  VectorXd q = VectorXd::Zero(m.n_q());
  for (int f = 0; f < m.n_r() / 2; ++f) {
    q[2 * f] = 0.87;
    q[2 * f + 1] = -1.74;
  }
  return q;
}

/// One revolute-z joint with a unit-distance tip sphere, no object contact.
inline ModelSpec single_joint_spec() {
  ModelSpec s;
  s.name = "single";
  RobotJointSpec j;
  j.name = "j0";
  j.stiffness = 100.0;
  s.robot_joints.push_back(j);
  s.object.kind = ObjectJointKind::Hinge;
  s.object.origin = Vector3d(5.0, 0.0, 0.0);
  s.object.damping = VectorXd::Zero(1);
  s.object.inertia = MatrixXd::Identity(1, 1);
  s.geometries.push_back({"tip", "j0", Sphere{Vector3d(1.0, 0.0, 0.0), 0.05}});
  s.geometries.push_back({"disk", "object", Sphere{Vector3d::Zero(), 0.1}});
  return s;
}

/// Two spatial three-joint fingers around a free planar puck lying on a floor.
/// Joint axes are deliberately non-parallel so kinematics is fully 3D.
inline SystemModel spatial_model(double gravity = 0.0) {
  ModelSpec s;
  s.name = "spatial";
  s.gravity = Vector3d(0.0, 0.0, -gravity);
  for (int f = 0; f < 2; ++f) {
    const std::string p = "f" + std::to_string(f);
    const double side = f == 0 ? 1.0 : -1.0;
    RobotJointSpec j0;
    j0.name = p + "_j0";
    j0.origin = Vector3d(0.0, side * 0.15, 0.05);
    j0.rpy = Vector3d(0.0, 0.0, -side * M_PI / 2);
    j0.axis = Vector3d(0.0, 0.0, 1.0);
    j0.stiffness = 8.0;
    j0.mass = 0.05;
    j0.com = Vector3d(0.03, 0.0, 0.0);
    RobotJointSpec j1 = j0;
    j1.name = p + "_j1";
    j1.parent = j0.name;
    j1.origin = Vector3d(0.06, 0.0, 0.0);
    j1.rpy = Vector3d(0.1, 0.0, 0.0);
    j1.axis = Vector3d(0.0, 1.0, 0.2).normalized();
    j1.stiffness = 5.0;
    RobotJointSpec j2 = j1;
    j2.name = p + "_j2";
    j2.parent = j1.name;
    j2.origin = Vector3d(0.05, 0.0, 0.0);
    j2.rpy = Vector3d(0.0, 0.2, 0.0);
    j2.axis = Vector3d(0.3, 1.0, 0.0).normalized();
    j2.stiffness = 3.0;
    s.robot_joints.insert(s.robot_joints.end(), {j0, j1, j2});
    s.geometries.push_back({p + "_link", j1.name, Capsule{Vector3d::Zero(), Vector3d(0.05, 0, 0), 0.008}});
    s.geometries.push_back({p + "_tip", j2.name, Sphere{Vector3d(0.04, 0.0, 0.0), 0.01}});
  }
  s.object.kind = ObjectJointKind::PlanarFree;
  s.object.damping = VectorXd::Constant(3, 0.2);
  MatrixXd M = MatrixXd::Zero(3, 3);
  M.diagonal() << 0.2, 0.2, 3e-4;
  s.object.inertia = M;
  s.object.mass = 0.2;
  s.geometries.push_back({"puck", "object", Sphere{Vector3d(0.0, 0.0, 0.052), 0.05}});
  s.geometries.push_back({"puck_edge", "object", Sphere{Vector3d(0.04, 0.0, 0.03), 0.02}});
  s.geometries.push_back({"floor", "world", HalfSpace{Vector3d::Zero(), Vector3d::UnitZ()}});
  s.default_friction = 0.8;
  return SystemModel(s);
}

/// Central finite-difference Jacobian of f at x.
inline MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& x,
                            double eps) {
  const VectorXd f0 = f(x);
  MatrixXd J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd xp = x, xm = x;
    xp[i] += eps;
    xm[i] -= eps;
    J.col(i) = (f(xp) - f(xm)) / (2.0 * eps);
  }
  return J;
}

inline double rel_error(const MatrixXd& a, const MatrixXd& ref) {
  const double den = ref.cwiseAbs().maxCoeff();
  return (a - ref).cwiseAbs().maxCoeff() / (den > 0.0 ? den : 1.0);
}

inline MatrixXd random_spd(std::mt19937& rng, int n, double lo, double hi) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(lo, hi);
  MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = nd(rng);
  Eigen::HouseholderQR<MatrixXd> qr(A);
  const MatrixXd Qm = qr.householderQ();
  VectorXd d(n);
  for (int i = 0; i < n; ++i) d[i] = ud(rng);
  return Qm * d.asDiagonal() * Qm.transpose();
}

inline VectorXd random_vec(std::mt19937& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

/// A random barrier-step program with synthetic contact Jacobians. v = 0 is
/// strictly feasible because every phi is positive.
inline QdProblem random_qd_problem(std::mt19937& rng, int n_q, int n_c, double kappa) {
  std::uniform_real_distribution<double> phi(1e-4, 5e-3);
  std::uniform_real_distribution<double> mu(0.1, 1.2);
  QdProblem p;
  p.h = 0.1;
  p.kappa = kappa;
  p.Q = random_spd(rng, n_q, 0.05, 5.0);
  p.b = random_vec(rng, n_q, 0.5);
  p.phi.resize(n_c);
  for (int i = 0; i < n_c; ++i) {
    ContactInfo c;
    c.mu = mu(rng);
    c.J = MatrixXd(3, n_q);
    for (int r = 0; r < 3; ++r) c.J.row(r) = random_vec(rng, n_q).transpose();
    p.phi[i] = phi(rng);
    p.contacts.push_back(c);
  }
  p.q = VectorXd::Zero(n_q);
  return p;
}

/// Distance from finger f's tip to the nearest object geometry.
inline double finger_gap(const SystemModel& m, const VectorXd& q, int f) {
  const KinematicsState kin = forward_kinematics(m, q);
  double best = std::numeric_limits<double>::infinity();
  for (const PairId& p : candidate_pairs(m)) {
    const Geometry& g = m.geometries()[static_cast<std::size_t>(p.a)];
    if (g.role != BodyRole::Robot) continue;
    if (!m.moves(2 * f, g.frame)) continue;
    best = std::min(best, evaluate_pair(m, kin, p).phi);
  }
  return best;
}

/// Bend finger f's distal joint until its tip gap equals `gap`.
inline void set_finger_gap(const SystemModel& m, VectorXd& q, int f, double gap) {
  double lo = -2.4, hi = -1.25;  // gap decreases monotonically over this bracket
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    q[2 * f + 1] = mid;
    if (finger_gap(m, q, f) > gap) lo = mid; else hi = mid;
  }
  q[2 * f + 1] = 0.5 * (lo + hi);
}

struct StepInstance {
  VectorXd q;
  VectorXd u;
  CqdcParams params;
};

/// Random configuration of a planar scenario model with every fingertip
/// between 0.2 and 8 mm from the disk, random command and kappa.
inline StepInstance contact_rich_instance(const SystemModel& m, std::mt19937& rng) {
  std::uniform_real_distribution<double> base(-0.12, 0.12), gap(2e-4, 8e-3), yaw(-M_PI, M_PI),
      xy(-0.004, 0.004), cmd(-0.05, 0.05);
  std::uniform_int_distribution<int> kpick(0, 2);
  StepInstance in;
  in.q = nominal_q(m);
  in.q[m.n_q() - 1] = yaw(rng);
  if (m.n_o() == 3) {
    in.q[m.n_r()] = xy(rng);
    in.q[m.n_r() + 1] = xy(rng);
  }
  for (int f = 0; f < m.n_r() / 2; ++f) {
    in.q[2 * f] += base(rng);
    set_finger_gap(m, in.q, f, gap(rng));
  }
  in.u = VectorXd(m.n_r());
  for (int i = 0; i < m.n_r(); ++i) in.u[i] = cmd(rng);
  in.params.kappa = std::array<double, 3>{10.0, 100.0, 1000.0}[static_cast<std::size_t>(kpick(rng))];
  in.params.h = 0.1;
  in.params.phi_max = 0.05;
  return in;
}

struct GradientCheck {
  double err_x = 0.0;
  double err_u = 0.0;
  int contacts = 0;
};

/// Analytic f_x, f_u against central differences of q_next.
inline GradientCheck check_step_gradients(const SystemModel& m, const StepInstance& in,
                                          double eps = 1e-6) {
  const SmoothStepResult r = step_dynamics(m, in.q, in.u, in.params);
  CqdcParams plain = in.params;
  plain.compute_gradients = false;
  const MatrixXd fx = fd_jacobian(
      [&](const VectorXd& x) { return step_dynamics(m, x, in.u, plain).q_next; }, in.q, eps);
  const MatrixXd fu = fd_jacobian(
      [&](const VectorXd& u) { return step_dynamics(m, in.q, u, plain).q_next; }, in.u, eps);
  GradientCheck g;
  g.err_x = rel_error(r.f_x, fx);
  g.err_u = rel_error(r.f_u, fu);
  g.contacts = static_cast<int>(r.contacts.size());
  return g;
}

/// Finite-horizon LQ tracking by Riccati recursion in error coordinates,
/// written independently of the library: minimize
///   sum_k (x_k - r_k)' Qk (x_k - r_k) + u_k' R u_k + (x_N - r_N)' QN (x_N - r_N)
/// subject to x_{k+1} = A x_k + B u_k + c.
inline std::vector<VectorXd> riccati_oracle(const MatrixXd& A, const MatrixXd& B, const VectorXd& c,
                                            const std::vector<MatrixXd>& Qk,
                                            const std::vector<VectorXd>& r, const MatrixXd& R,
                                            const VectorXd& x0) {
  const int N = static_cast<int>(Qk.size()) - 1;
  std::vector<MatrixXd> K(N);
  std::vector<VectorXd> kff(N);
  MatrixXd S = Qk[N];
  VectorXd s = -Qk[N] * r[N];  // V = x'Sx + 2 s'x
  for (int k = N - 1; k >= 0; --k) {
    const MatrixXd H = R + B.transpose() * S * B;
    const MatrixXd Hinv = H.inverse();
    K[k] = -Hinv * B.transpose() * S * A;
    kff[k] = -Hinv * B.transpose() * (S * c + s);
    const MatrixXd Acl = A + B * K[k];
    const VectorXd ccl = B * kff[k] + c;
    const MatrixXd Sn = Qk[k] + K[k].transpose() * R * K[k] + Acl.transpose() * S * Acl;
    s = -Qk[k] * r[k] + K[k].transpose() * R * kff[k] + Acl.transpose() * (S * ccl + s);
    S = 0.5 * (Sn + Sn.transpose());
  }
  std::vector<VectorXd> U;
  VectorXd x = x0;
  for (int k = 0; k < N; ++k) {
    U.push_back(K[k] * x + kff[k]);
    x = A * x + B * U.back() + c;
  }
  return U;
}

}  // namespace cimpc::test
