#include "cimpc/tracking.hpp"

#include <chrono>

#include "cimpc/kinematics.hpp"

namespace cimpc {

VectorXd TrackingState::stacked() const {
  VectorXd x(xi.size() + xi_d.size() + F_e.size());
  x << xi, xi_d, F_e;
  return x;
}

LinearPlant assemble_plant(const StiffnessSet& ss, int n_r, double k_p, double k_d,
                           ObjectMode mode, double dt) {
  if (!(k_p > 0.0) || !(k_d > 0.0)) throw ConfigError("assemble_plant: gains must be positive");
  if (!(dt > 0.0)) throw ConfigError("assemble_plant: dt must be positive");
  LinearPlant pl;
  pl.k_p = k_p;
  pl.k_d = k_d;
  pl.dt = dt;
  pl.n_r = n_r;
  pl.stiffness = ss;
  const int nf = 3 * ss.size();
  const int nx = 2 * n_r + nf;
  const MatrixXd I_r = MatrixXd::Identity(n_r, n_r);

  MatrixXd S = MatrixXd::Identity(nf, nf);
  if (nf > 0) {
    S += ss.M_bar * ss.J_stack.transpose() / k_p;
    if (mode == ObjectMode::Free) {
      const double eps = 1e-6 * std::max(1.0, ss.K_o.trace() / 6.0);
      const Matrix6d Ko_inv = (ss.K_o + eps * Matrix6d::Identity()).inverse();
      S += ss.N_bar * Ko_inv * ss.G_stack.transpose();
    }
    pl.force_gain = S.partialPivLu().solve(ss.M_bar);
  } else {
    pl.force_gain = MatrixXd::Zero(0, n_r);
  }

  pl.force_operator = S;

  pl.A = MatrixXd::Zero(nx, nx);
  pl.A.block(0, 0, n_r, n_r) = -(k_p / k_d) * I_r;
  pl.A.block(0, n_r, n_r, n_r) = (k_p / k_d) * I_r;
  if (nf > 0) pl.A.block(0, 2 * n_r, n_r, nf) = -ss.J_stack.transpose() / k_d;
  pl.B = MatrixXd::Zero(nx, n_r);
  pl.B.topRows(n_r) = I_r;
  pl.B.middleRows(n_r, n_r) = I_r;
  if (nf > 0) pl.B.bottomRows(nf) = pl.force_gain;

  pl.Ad = MatrixXd::Identity(nx, nx) + dt * pl.A;
  pl.Bd = dt * pl.B;
  return pl;
}

VectorXd tracking_state_weight(const LinearPlant& plant, const TrackingReference& ref,
                               const TrackingWeights& w, bool terminal) {
  const int nr = plant.n_r;
  const int nf = 3 * plant.n_c();
  VectorXd q = VectorXd::Zero(plant.n_x());
  q.head(nr).setConstant(w.w_xi);
  if (nf > 0) {
    if (ref.F_weight.size() == nf) {
      q.tail(nf) = w.w_F * ref.F_weight;
    } else {
      q.tail(nf).setConstant(w.w_F);
    }
  }
  if (terminal) q *= w.terminal_scale;
  return q;
}

namespace {

VectorXd reference_state(const LinearPlant& plant, const TrackingReference& ref, int i) {
  const int nr = plant.n_r;
  const int nf = 3 * plant.n_c();
  VectorXd r = VectorXd::Zero(plant.n_x());
  r.head(nr) = ref.xi_ref.at(static_cast<std::size_t>(i));
  if (nf > 0) r.tail(nf) = ref.F_ref.at(static_cast<std::size_t>(i));
  return r;
}

void check_reference(const LinearPlant& plant, const TrackingReference& ref) {
  const std::size_t N = ref.u_ref.size();
  if (N < 1 || ref.xi_ref.size() != N + 1 || ref.F_ref.size() != N + 1) {
    throw DimensionError("tracking reference: expected N + 1 states and N controls");
  }
  for (const auto& x : ref.xi_ref) require_size(x.size(), plant.n_r, "xi_ref");
  for (const auto& f : ref.F_ref) require_size(f.size(), 3 * plant.n_c(), "F_ref");
  for (const auto& u : ref.u_ref) require_size(u.size(), plant.n_r, "u_ref");
}

}  // namespace

double tracking_cost(const VectorXd& x0, const LinearPlant& plant, const TrackingReference& ref,
                     const TrackingWeights& w, const std::vector<VectorXd>& U,
                     std::vector<VectorXd>* X) {
  check_reference(plant, ref);
  const int N = static_cast<int>(ref.u_ref.size());
  const VectorXd qw = tracking_state_weight(plant, ref, w, false);
  const VectorXd qN = tracking_state_weight(plant, ref, w, true);
  VectorXd x = x0;
  double c = 0.0;
  if (X) X->assign(1, x0);
  for (int i = 0; i < N; ++i) {
    const VectorXd e = x - reference_state(plant, ref, i);
    const VectorXd du = U[i] - ref.u_ref[i];
    c += e.dot(qw.asDiagonal() * e) + w.w_u * du.squaredNorm();
    x = plant.Ad * x + plant.Bd * U[i];
    if (X) X->push_back(x);
  }
  const VectorXd e = x - reference_state(plant, ref, N);
  return c + e.dot(qN.asDiagonal() * e);
}

TrackingSolution tracking_solve(const TrackingState& s0, const LinearPlant& plant,
                                const TrackingReference& ref, const TrackingWeights& w) {
  check_reference(plant, ref);
  if (w.w_xi < 0.0 || w.w_F < 0.0 || !(w.w_u > 0.0) || w.terminal_scale < 0.0) {
    throw ConfigError("tracking weights must be nonnegative with w_u > 0");
  }
  if ((ref.F_weight.array() < 0.0).any()) throw ConfigError("force weights must be >= 0");
  const VectorXd x0 = s0.stacked();
  require_size(x0.size(), plant.n_x(), "tracking state");
  const int N = static_cast<int>(ref.u_ref.size());
  const int nu = plant.n_r;
  const MatrixXd& A = plant.Ad;
  const MatrixXd& B = plant.Bd;
  const VectorXd qw = tracking_state_weight(plant, ref, w, false);
  const VectorXd qN = tracking_state_weight(plant, ref, w, true);
  const MatrixXd R = w.w_u * MatrixXd::Identity(nu, nu);

  // V(x) = x'Px + 2p'x + const
  MatrixXd P = qN.asDiagonal();
  VectorXd p = -(qN.asDiagonal() * reference_state(plant, ref, N));
  std::vector<MatrixXd> K(static_cast<std::size_t>(N));
  std::vector<VectorXd> k(static_cast<std::size_t>(N));
  for (int i = N - 1; i >= 0; --i) {
    const MatrixXd H = R + B.transpose() * P * B;
    const MatrixXd G = B.transpose() * P * A;
    const VectorXd g = B.transpose() * p - R * ref.u_ref[i];
    Eigen::LLT<MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) {
      throw SolverError("tracking_solve: Riccati step lost positive definiteness");
    }
    K[i] = -llt.solve(G);
    k[i] = -llt.solve(g);
    MatrixXd Pn = A.transpose() * P * A + G.transpose() * K[i];
    Pn.diagonal() += qw;
    p = A.transpose() * p + G.transpose() * k[i] - qw.asDiagonal() * reference_state(plant, ref, i);
    P = 0.5 * (Pn + Pn.transpose());
    if (!P.allFinite()) throw SolverError("tracking_solve: Riccati recursion diverged");
  }

  TrackingSolution sol;
  sol.X.push_back(x0);
  VectorXd x = x0;
  for (int i = 0; i < N; ++i) {
    sol.U.push_back(K[i] * x + k[i]);
    x = A * x + B * sol.U.back();
    sol.X.push_back(x);
  }
  sol.cost = tracking_cost(x0, plant, ref, w, sol.U);
  return sol;
}

ContactController::ContactController(const SystemModel& model, ControllerConfig cfg)
    : model_(model), cfg_(std::move(cfg)) {
  cfg_.contact.validate();
  if (cfg_.N < 1) throw ConfigError("controller horizon must be >= 1");
}

ControllerOutput ContactController::step(const VectorXd& q,
                                         const std::vector<ForceMeasurement>& measured,
                                         const ReferenceTrajectory* refs, double t) {
  const auto t_start = std::chrono::steady_clock::now();
  const int nr = model_.n_r();
  require_size(q.size(), model_.n_q(), "controller q");
  if (xi_d_.size() != nr) xi_d_ = q.head(nr);
  ControllerOutput out;
  if (!refs || refs->horizon() < 1) {
    out.held = true;
    out.q_d = xi_d_;
    out.qd_dot = VectorXd::Zero(nr);
    out.u0 = VectorXd::Zero(nr);
    return out;
  }

  std::vector<InterpolatedReference> interp;
  interp.reserve(static_cast<std::size_t>(cfg_.N + 1));
  for (int j = 0; j <= cfg_.N; ++j) {
    interp.push_back(interpolate_references(*refs, nr, t + j * cfg_.dt));
  }

  const KinematicsState kin = forward_kinematics(model_, q);
  std::vector<ContactInfo> active;
  std::vector<bool> is_measured;
  std::vector<bool> is_planned;
  for (auto& c : detect_contacts(model_, kin, cfg_.phi_max)) {
    if (!c.robot_object()) continue;
    bool meas = false;
    for (const auto& m : measured) {
      if (m.pair == c.pair && -m.force_world.dot(c.normal) > cfg_.measured_threshold) meas = true;
    }
    bool plan = false;
    for (const auto& f : interp.front().forces) {
      if (f.pair == c.pair && -f.force_world.dot(c.normal) > cfg_.planned_threshold) plan = true;
    }
    if (meas || plan) {
      active.push_back(std::move(c));
      is_measured.push_back(meas);
      is_planned.push_back(plan);
    }
  }

  const StiffnessSet ss = build_stiffness_set(active, nr, cfg_.contact);
  const LinearPlant plant = assemble_plant(ss, nr, cfg_.k_p, cfg_.k_d, cfg_.object_mode, cfg_.dt);
  const int nc = ss.size();

  TrackingState x0;
  x0.xi = q.head(nr);
  x0.xi_d = xi_d_;
  x0.F_e = VectorXd::Zero(3 * nc);
  TrackingReference ref;
  ref.F_weight = VectorXd::Zero(3 * nc);
  for (int i = 0; i < nc; ++i) {
    const Matrix3d& R = ss.R_C[static_cast<std::size_t>(i)];
    for (const auto& m : measured) {
      if (m.pair == ss.pairs[static_cast<std::size_t>(i)]) {
        x0.F_e.segment<3>(3 * i) = R.transpose() * m.force_world;
      }
    }
    const bool meas = is_measured[static_cast<std::size_t>(i)];
    const bool plan = is_planned[static_cast<std::size_t>(i)];
    const double wgt = plan ? (meas ? 1.0 : 0.0) : cfg_.unplanned_weight;
    ref.F_weight.segment<3>(3 * i).setConstant(wgt);
  }
  for (int j = 0; j <= cfg_.N; ++j) {
    const auto& ir = interp[static_cast<std::size_t>(j)];
    ref.xi_ref.push_back(ir.q_d);
    VectorXd F = VectorXd::Zero(3 * nc);
    for (int i = 0; i < nc; ++i) {
      if (!is_planned[static_cast<std::size_t>(i)]) continue;
      for (const auto& f : ir.forces) {
        if (f.pair == ss.pairs[static_cast<std::size_t>(i)]) {
          F.segment<3>(3 * i) = ss.R_C[static_cast<std::size_t>(i)].transpose() * f.force_world;
        }
      }
    }
    ref.F_ref.push_back(F);
    if (j < cfg_.N) ref.u_ref.push_back(ir.qd_dot);
  }

  const TrackingSolution sol = tracking_solve(x0, plant, ref, cfg_.weights);
  out.u0 = sol.U.front();
  xi_d_ += cfg_.dt * out.u0;
  out.q_d = xi_d_;
  out.qd_dot = out.u0;
  out.pairs = ss.pairs;
  for (const auto& f : interp.front().forces) out.F_ff.push_back({f.pair, f.force_world});
  if (nc > 0) {
    Eigen::JacobiSVD<MatrixXd> svd(plant.force_operator);
    const auto& sv = svd.singularValues();
    out.force_gain_cond = sv(0) / std::max(sv(sv.size() - 1), 1e-300);
  }
  out.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

}  // namespace cimpc
