#include "cimpc/cqdc.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace cimpc {

namespace {

struct ConeTerms {
  double s;
  Vector2d t;  // J_t v
  double alpha;
};

ConeTerms cone_terms(const QdProblem& prob, std::size_t i, const VectorXd& v) {
  const ContactInfo& c = prob.contacts[i];
  const Vector3d jv = c.J * v;
  ConeTerms ct;
  ct.s = jv[0] + prob.phi[static_cast<Eigen::Index>(i)] / prob.h;
  ct.t = jv.tail<2>();
  ct.alpha = ct.s * ct.s - c.mu * c.mu * ct.t.squaredNorm();
  return ct;
}

// Factor H, adding a growing multiple of the identity if roundoff breaks
// positive definiteness.
Eigen::LLT<MatrixXd> factor_spd(const MatrixXd& H, double scale) {
  Eigen::LLT<MatrixXd> llt(H);
  if (llt.info() == Eigen::Success) return llt;
  const auto n = H.rows();
  double reg = 1e-10 * scale;
  for (int k = 0; k < 3; ++k, reg *= 10.0) {
    llt.compute(H + reg * MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt;
  }
  throw SolverError("barrier Hessian is not positive definite after regularization");
}

double reg_scale(const QdProblem& prob) {
  return prob.Q.trace() / static_cast<double>(std::max<Eigen::Index>(1, prob.Q.rows()));
}

// b + grad(zeta)/kappa at fixed v for contacts re-evaluated at q.
VectorXd residual_at(const SystemModel& model, const VectorXd& q, const QdProblem& base,
                     const VectorXd& v, const CqdcParams& params) {
  const KinematicsState kin = forward_kinematics(model, q);
  std::vector<ContactInfo> contacts;
  contacts.reserve(base.contacts.size());
  for (const auto& c : base.contacts) contacts.push_back(evaluate_pair(model, kin, c.pair));
  const QdProblem p = assemble(model, kin, base.u, std::move(contacts), params);
  return barrier_gradient(p, v) - p.Q * v;
}

}  // namespace

QdProblem assemble(const SystemModel& model, const KinematicsState& kin, const VectorXd& u,
                   std::vector<ContactInfo> contacts, const CqdcParams& params) {
  if (!(params.h > 0.0)) throw ConfigError("cqdc: step h must be positive");
  if (!(params.kappa > 0.0)) throw ConfigError("cqdc: kappa must be positive");
  const int nr = model.n_r();
  const int no = model.n_o();
  const int nq = model.n_q();
  require_size(u.size(), nr, "cqdc u");

  QdProblem p;
  p.h = params.h;
  p.kappa = params.kappa;
  p.q = kin.q;
  p.u = u;
  p.n_r = nr;
  p.Q = MatrixXd::Zero(nq, nq);
  const VectorXd& kr = model.joint_stiffness();
  p.Q.topLeftCorner(nr, nr) = (params.h * kr).asDiagonal();
  p.Q.bottomRightCorner(no, no) = model.object_inertia() / params.h;
  p.Q.bottomRightCorner(no, no).diagonal() += model.object_damping();

  VectorXd tau = gravity_forces(model, kin);
  if (params.tau_ext.size() > 0) {
    require_size(params.tau_ext.size(), nq, "cqdc tau_ext");
    tau += params.tau_ext;
  }
  p.b = -tau;
  p.b.head(nr) -= kr.cwiseProduct(u);

  p.contacts = std::move(contacts);
  p.phi.resize(static_cast<Eigen::Index>(p.contacts.size()));
  for (std::size_t i = 0; i < p.contacts.size(); ++i) {
    p.phi[static_cast<Eigen::Index>(i)] = std::max(p.contacts[i].phi, params.phi_min);
  }
  return p;
}

QdProblem assemble(const SystemModel& model, const VectorXd& q, const VectorXd& u,
                   const CqdcParams& params) {
  const KinematicsState kin = forward_kinematics(model, q);
  return assemble(model, kin, u, detect_contacts(model, kin, params.phi_max), params);
}

bool strictly_feasible(const QdProblem& prob, const VectorXd& v) {
  for (std::size_t i = 0; i < prob.contacts.size(); ++i) {
    const ConeTerms ct = cone_terms(prob, i, v);
    if (!(ct.s > 0.0) || !(ct.alpha > 0.0)) return false;
  }
  return true;
}

double quadratic_objective(const QdProblem& prob, const VectorXd& v) {
  return 0.5 * v.dot(prob.Q * v) + prob.b.dot(v);
}

double barrier_objective(const QdProblem& prob, const VectorXd& v) {
  double zeta = 0.0;
  for (std::size_t i = 0; i < prob.contacts.size(); ++i) {
    const ConeTerms ct = cone_terms(prob, i, v);
    if (!(ct.s > 0.0) || !(ct.alpha > 0.0)) return std::numeric_limits<double>::infinity();
    zeta -= std::log(ct.alpha);
  }
  return quadratic_objective(prob, v) + zeta / prob.kappa;
}

VectorXd barrier_gradient(const QdProblem& prob, const VectorXd& v) {
  VectorXd g = prob.Q * v + prob.b;
  for (std::size_t i = 0; i < prob.contacts.size(); ++i) {
    const ContactInfo& c = prob.contacts[i];
    const ConeTerms ct = cone_terms(prob, i, v);
    Vector3d w;
    w << ct.s, -c.mu * c.mu * ct.t;
    g -= (2.0 / (prob.kappa * ct.alpha)) * (c.J.transpose() * w);
  }
  return g;
}

MatrixXd barrier_hessian(const QdProblem& prob, const VectorXd& v) {
  // Per cone, in z = (s, mu J_t v) coordinates the Hessian of -log(s^2 - |w|^2)
  // has eigenpairs 2/(s-r)^2 on (1,-u), 2/(s+r)^2 on (1,u) and 2/alpha on (0,u_perp),
  // r = |w|, u = w/r. Summing rank-one terms keeps H positive definite at large kappa.
  MatrixXd H = prob.Q;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < prob.contacts.size(); ++i) {
    const ContactInfo& c = prob.contacts[i];
    const ConeTerms ct = cone_terms(prob, i, v);
    const Vector2d w = c.mu * ct.t;
    const double r = w.norm();
    const Vector2d u = r > 0.0 ? Vector2d(w / r) : Vector2d::UnitX();
    const Vector2d u_perp(-u.y(), u.x());
    const double a = ct.alpha;
    const double sp = ct.s + r;
    Matrix3Xd M(3, c.J.cols());
    M.row(0) = c.J.row(0);
    M.bottomRows(2) = c.mu * c.J.bottomRows(2);
    const VectorXd e_minus = inv_sqrt2 * (M.row(0).transpose() - M.bottomRows(2).transpose() * u);
    const VectorXd e_plus = inv_sqrt2 * (M.row(0).transpose() + M.bottomRows(2).transpose() * u);
    const VectorXd e_perp = M.bottomRows(2).transpose() * u_perp;
    const double l_minus = 2.0 * sp * sp / (a * a);  // 2/(s-r)^2 with s-r = alpha/(s+r)
    const double l_plus = 2.0 / (sp * sp);
    const double l_perp = 2.0 / a;
    H.noalias() += (l_minus / prob.kappa) * (e_minus * e_minus.transpose());
    H.noalias() += (l_plus / prob.kappa) * (e_plus * e_plus.transpose());
    H.noalias() += (l_perp / prob.kappa) * (e_perp * e_perp.transpose());
  }
  return H;
}

namespace {

BarrierSolution barrier_solve_direct(const QdProblem& prob, const VectorXd& v0, int max_iters,
                                     double decrement_tol, double gradient_tol) {
  const auto n = prob.Q.rows();
  BarrierSolution sol;
  sol.v = v0.size() == 0 ? VectorXd::Zero(n) : v0;
  require_size(sol.v.size(), n, "barrier_solve v0");
  if (!strictly_feasible(prob, sol.v)) {
    throw SolverError("barrier_solve: start point is not strictly feasible");
  }
  const double scale = reg_scale(prob);

  if (prob.contacts.empty()) {
    sol.v = -factor_spd(prob.Q, scale).solve(prob.b);
    sol.gradient_norm = (prob.Q * sol.v + prob.b).lpNorm<Eigen::Infinity>();
    return sol;
  }

  constexpr double kArmijo = 1e-4;
  constexpr double kBeta = 0.5;
  double f = barrier_objective(prob, sol.v);
  for (int it = 0; it < max_iters; ++it) {
    const VectorXd g = barrier_gradient(prob, sol.v);
    const MatrixXd H = barrier_hessian(prob, sol.v);
    const VectorXd dv = -factor_spd(H, scale).solve(g);
    const double lambda2 = std::max(0.0, -g.dot(dv));
    sol.decrement = std::sqrt(lambda2);
    sol.gradient_norm = g.lpNorm<Eigen::Infinity>();
    sol.iters = it;
    if (sol.decrement <= decrement_tol) return sol;

    double t = 1.0;
    while (!strictly_feasible(prob, sol.v + t * dv)) {
      t *= kBeta;
      if (t < 1e-20) throw SolverError("barrier_solve: feasibility clipping collapsed");
    }
    // Inside the quadratic-convergence region of the kappa-scaled barrier,
    // take the clipped Newton step without the sufficient-decrease test.
    const bool pure_newton = prob.kappa * lambda2 < 1e-4;
    double f_new = barrier_objective(prob, sol.v + t * dv);
    if (!pure_newton) {
      int halvings = 0;
      while (f_new > f - kArmijo * t * lambda2) {
        t *= kBeta;
        f_new = barrier_objective(prob, sol.v + t * dv);
        if (++halvings > 60) break;
      }
      if (halvings > 60) {
        if (sol.gradient_norm <= gradient_tol) return sol;
        throw SolverError("barrier_solve: line search stalled, gradient norm " +
                          std::to_string(sol.gradient_norm));
      }
    }
    sol.v += t * dv;
    f = f_new;
  }
  const VectorXd g = barrier_gradient(prob, sol.v);
  sol.gradient_norm = g.lpNorm<Eigen::Infinity>();
  sol.iters = max_iters;
  if (sol.gradient_norm <= gradient_tol) return sol;
  std::ostringstream msg;
  msg << "barrier_solve: no convergence after " << max_iters << " iterations (decrement "
      << sol.decrement << ", gradient " << sol.gradient_norm << ", contacts "
      << prob.contacts.size() << ")";
  throw SolverError(msg.str());
}

}  // namespace

BarrierSolution barrier_solve(const QdProblem& prob, const VectorXd& v0, int max_iters,
                              double decrement_tol, double gradient_tol) {
  try {
    return barrier_solve_direct(prob, v0, max_iters, decrement_tol, gradient_tol);
  } catch (const SolverError&) {
    if (prob.contacts.empty() || !(prob.kappa > 10.0)) throw;
  }
  // Large kappa from a poor start: follow the central path from kappa = 10.
  QdProblem path = prob;
  VectorXd v = v0;
  for (double k = 10.0; k < prob.kappa; k *= 10.0) {
    path.kappa = k;
    v = barrier_solve_direct(path, v, max_iters, decrement_tol, gradient_tol).v;
  }
  return barrier_solve_direct(prob, v, max_iters, decrement_tol, gradient_tol);
}

std::vector<Vector3d> extract_duals(const QdProblem& prob, const VectorXd& v) {
  std::vector<Vector3d> lambda;
  lambda.reserve(prob.contacts.size());
  for (std::size_t i = 0; i < prob.contacts.size(); ++i) {
    const ConeTerms ct = cone_terms(prob, i, v);
    if (!(ct.alpha > 0.0) || !(ct.s > 0.0)) {
      throw SolverError("extract_duals: velocity is not strictly feasible");
    }
    const double mu = prob.contacts[i].mu;
    const double scale = 2.0 / (prob.kappa * ct.alpha);
    lambda.emplace_back(scale * ct.s, -scale * mu * ct.t[0], -scale * mu * ct.t[1]);
  }
  return lambda;
}

std::vector<Vector3d> dual_forces(const QdProblem& prob, const std::vector<Vector3d>& lambda) {
  std::vector<Vector3d> f;
  f.reserve(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    const double mu = prob.contacts[i].mu;
    f.emplace_back(mu * lambda[i][1], mu * lambda[i][2], lambda[i][0]);
  }
  return f;
}

SmoothGradients smooth_gradients(const SystemModel& model, const KinematicsState& kin,
                                 const QdProblem& prob, const VectorXd& v,
                                 const CqdcParams& params) {
  const int nq = model.n_q();
  const int nr = model.n_r();
  MatrixXd dr_dq = -gravity_forces_jacobian(model, kin);

  if (params.gradient_mode == GradientMode::FiniteDifference) {
    dr_dq.setZero();
    for (int m = 0; m < nq; ++m) {
      VectorXd qp = prob.q;
      VectorXd qm = prob.q;
      qp[m] += params.fd_step;
      qm[m] -= params.fd_step;
      dr_dq.col(m) = (residual_at(model, qp, prob, v, params) -
                      residual_at(model, qm, prob, v, params)) /
                     (2.0 * params.fd_step);
    }
  } else {
    for (std::size_t i = 0; i < prob.contacts.size(); ++i) {
      const ContactInfo& c = prob.contacts[i];
      // Clamped contacts have a constant signed distance.
      const bool clamped = c.phi < params.phi_min;
      const ContactDerivatives cd = contact_derivatives(model, kin, c);
      const double mu2 = c.mu * c.mu;
      const Vector3d& n = c.normal;
      const Vector3d delta = c.J_rel * v;
      const double s = n.dot(delta) + prob.phi[static_cast<Eigen::Index>(i)] / prob.h;
      const Vector3d tv = delta - n.dot(delta) * n;
      const double alpha = s * s - mu2 * tv.squaredNorm();
      const Vector3d w = s * n - mu2 * tv;
      const double k = prob.kappa;
      for (int m = 0; m < nq; ++m) {
        const Vector3d& dn = cd.dnormal[m];
        const Vector3d ddelta = cd.dJ_rel[m] * v;
        const double dphi = clamped ? 0.0 : cd.dphi[m];
        const double dnd = dn.dot(delta) + n.dot(ddelta);
        const double ds = dnd + dphi / prob.h;
        const Vector3d dtv = ddelta - dnd * n - n.dot(delta) * dn;
        const double dalpha = 2.0 * s * ds - 2.0 * mu2 * tv.dot(dtv);
        const Vector3d dw = ds * n + s * dn - mu2 * dtv;
        // d/dq_m of -(2/alpha) J_rel' w, scaled by 1/kappa
        dr_dq.col(m) += ((2.0 * dalpha / (alpha * alpha)) * (c.J_rel.transpose() * w) -
                         (2.0 / alpha) * (cd.dJ_rel[m].transpose() * w +
                                          c.J_rel.transpose() * dw)) /
                        k;
      }
    }
  }

  const MatrixXd H = barrier_hessian(prob, v);
  const auto llt = factor_spd(H, reg_scale(prob));
  SmoothGradients out;
  out.dv_dq = -llt.solve(dr_dq);
  MatrixXd db_du = MatrixXd::Zero(nq, nr);
  db_du.topRows(nr) = model.joint_stiffness().asDiagonal();
  out.dv_du = llt.solve(db_du);
  return out;
}

SmoothStepResult step_dynamics(const SystemModel& model, const VectorXd& q, const VectorXd& u,
                               const CqdcParams& params) {
  require_size(q.size(), model.n_q(), "step_dynamics q");
  const KinematicsState kin = forward_kinematics(model, q);
  const QdProblem prob =
      assemble(model, kin, u, detect_contacts(model, kin, params.phi_max), params);
  const BarrierSolution sol = barrier_solve(prob, VectorXd(), params.max_iters,
                                            params.decrement_tol, params.gradient_tol);
  SmoothStepResult r;
  r.v_star = sol.v;
  r.q_next = q + params.h * sol.v;
  r.contacts = prob.contacts;
  r.phi = prob.phi;
  r.lambda = extract_duals(prob, sol.v);
  r.force = dual_forces(prob, r.lambda);
  r.newton_iters = sol.iters;
  r.kkt_residual = barrier_gradient(prob, sol.v).lpNorm<Eigen::Infinity>();
  if (params.compute_gradients) {
    const SmoothGradients g = smooth_gradients(model, kin, prob, sol.v, params);
    r.dv_dq = g.dv_dq;
    r.dv_du = g.dv_du;
    r.f_x = MatrixXd::Identity(model.n_q(), model.n_q()) + params.h * g.dv_dq;
    r.f_u = params.h * g.dv_du;
  }
  return r;
}

namespace {

nlohmann::json to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json to_json(const VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

nlohmann::json step_diagnostics(const QdProblem& prob, const SmoothStepResult& res) {
  nlohmann::json j;
  j["h"] = prob.h;
  j["kappa"] = prob.kappa;
  j["Q"] = to_json(prob.Q);
  j["b"] = to_json(prob.b);
  j["v_star"] = to_json(res.v_star);
  j["newton_iters"] = res.newton_iters;
  j["kkt_residual"] = res.kkt_residual;
  nlohmann::json cs = nlohmann::json::array();
  for (std::size_t i = 0; i < prob.contacts.size(); ++i) {
    const auto& c = prob.contacts[i];
    nlohmann::json cj;
    cj["pair"] = {c.pair.a, c.pair.b};
    cj["phi"] = c.phi;
    cj["mu"] = c.mu;
    cj["normal"] = {c.normal.x(), c.normal.y(), c.normal.z()};
    if (i < res.lambda.size()) {
      cj["lambda"] = {res.lambda[i].x(), res.lambda[i].y(), res.lambda[i].z()};
      cj["force"] = {res.force[i].x(), res.force[i].y(), res.force[i].z()};
    }
    cs.push_back(cj);
  }
  j["contacts"] = cs;
  return j;
}

}  // namespace cimpc
