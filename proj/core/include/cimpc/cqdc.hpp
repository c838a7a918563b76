#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "cimpc/common.hpp"
#include "cimpc/contact.hpp"
#include "cimpc/kinematics.hpp"
#include "cimpc/model.hpp"

namespace cimpc {

enum class GradientMode { Analytic, FiniteDifference };

struct CqdcParams {
  double h = 0.1;
  double kappa = 100.0;
  double phi_max = 0.05;  // contact candidate threshold
  double phi_min = 1e-6;  // signed distances are clamped up to this
  VectorXd tau_ext;       // optional generalized external force, size n_q
  int max_iters = 100;
  double decrement_tol = 1e-10;
  double gradient_tol = 1e-8;
  bool compute_gradients = true;
  GradientMode gradient_mode = GradientMode::Analytic;
  double fd_step = 1e-6;
};

/// Quasi-dynamic step program in q = [q_r; q_o] order:
///   min 0.5 v'Qv + b'v  s.t.  mu_i |J_t,i v| <= J_n,i v + phi_i / h.
/// Q = blkdiag(h K_r, M_o/h + D_o), b = -[K_r u + tau_r; tau_o].
struct QdProblem {
  MatrixXd Q;
  VectorXd b;
  std::vector<ContactInfo> contacts;
  VectorXd phi;  // clamped signed distances used by the constraints
  double h = 0.1;
  double kappa = 100.0;
  VectorXd q;
  VectorXd u;
  int n_r = 0;
};

struct BarrierSolution {
  VectorXd v;
  int iters = 0;
  double decrement = 0.0;
  double gradient_norm = 0.0;
};

struct SmoothStepResult {
  VectorXd v_star;
  VectorXd q_next;
  std::vector<ContactInfo> contacts;
  VectorXd phi;
  /// Dual per contact in constraint form (normal, tangent_x, tangent_y).
  std::vector<Vector3d> lambda;
  /// Contact force on the robot in contact-frame coordinates, ordered like the
  /// columns of R_C (tangent_x, tangent_y, normal). Newtons.
  std::vector<Vector3d> force;
  MatrixXd dv_dq;
  MatrixXd dv_du;
  MatrixXd f_x;
  MatrixXd f_u;
  int newton_iters = 0;
  double kkt_residual = 0.0;
};

QdProblem assemble(const SystemModel& model, const VectorXd& q, const VectorXd& u,
                   const CqdcParams& params);
QdProblem assemble(const SystemModel& model, const KinematicsState& kin, const VectorXd& u,
                   std::vector<ContactInfo> contacts, const CqdcParams& params);

/// Smoothed objective 0.5 v'Qv + b'v + zeta(v)/kappa; +inf outside the barrier domain.
double barrier_objective(const QdProblem& prob, const VectorXd& v);
double quadratic_objective(const QdProblem& prob, const VectorXd& v);
bool strictly_feasible(const QdProblem& prob, const VectorXd& v);

/// Damped Newton on the smoothed objective from v0 (zero when empty).
BarrierSolution barrier_solve(const QdProblem& prob, const VectorXd& v0 = VectorXd(),
                              int max_iters = 100, double decrement_tol = 1e-10,
                              double gradient_tol = 1e-8);

/// Constraint-form duals (2 / (kappa alpha)) (s, -mu J_t v).
std::vector<Vector3d> extract_duals(const QdProblem& prob, const VectorXd& v);

/// Physical contact force on the robot per contact, (mu lambda_t, lambda_n).
std::vector<Vector3d> dual_forces(const QdProblem& prob, const std::vector<Vector3d>& lambda);

/// Gradient and Hessian of the smoothed objective.
VectorXd barrier_gradient(const QdProblem& prob, const VectorXd& v);
MatrixXd barrier_hessian(const QdProblem& prob, const VectorXd& v);

struct SmoothGradients {
  MatrixXd dv_dq;
  MatrixXd dv_du;
};

SmoothGradients smooth_gradients(const SystemModel& model, const KinematicsState& kin,
                                 const QdProblem& prob, const VectorXd& v,
                                 const CqdcParams& params);

SmoothStepResult step_dynamics(const SystemModel& model, const VectorXd& q, const VectorXd& u,
                               const CqdcParams& params);

nlohmann::json step_diagnostics(const QdProblem& prob, const SmoothStepResult& res);

}  // namespace cimpc
