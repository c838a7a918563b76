#include "cimpc/mpc.hpp"

#include <algorithm>
#include <cmath>

namespace cimpc {

std::vector<VectorXd> object_reference(const ObjectCommand& cmd, const VectorXd& q_o_now,
                                       double t_now, int N, double h) {
  require_size(cmd.rate.size(), q_o_now.size(), "object command rate");
  std::vector<VectorXd> ref;
  ref.reserve(static_cast<std::size_t>(N + 1));
  for (int i = 0; i <= N; ++i) {
    if (cmd.absolute) {
      require_size(cmd.origin.size(), q_o_now.size(), "object command origin");
      ref.push_back(cmd.origin + cmd.rate * (t_now + h * i - cmd.t_origin));
    } else {
      ref.push_back(q_o_now + cmd.rate * (h * i));
    }
  }
  return ref;
}

ReferenceTrajectory mpc_step(const SystemModel& model, const VectorXd& q_now, double t_now,
                             const MpcConfig& cfg, const ReferenceTrajectory* warm_start) {
  const int N = cfg.ocp.N;
  const double h = cfg.ocp.h;
  const int nr = model.n_r();
  cfg.ocp.validate(nr);
  require_size(q_now.size(), model.n_q(), "mpc q_now");

  CostConfig cost;
  cost.W_o = cfg.W_o;
  cost.W_r = cfg.W_r;
  cost.W_u = cfg.W_u;
  cost.gamma_r = cfg.gamma_r;
  cost.tail_knots = cfg.tail_knots;
  cost.q_r_ref = {cfg.q_r_ref};
  cost.q_o_ref = object_reference(cfg.command, q_now.tail(model.n_o()), t_now, N, h);
  cost.validate(nr, model.n_o());

  std::vector<VectorXd> U(static_cast<std::size_t>(N), VectorXd::Zero(nr));
  if (warm_start && warm_start->horizon() > 0) {
    const auto shift = std::max(0L, std::lround((t_now - warm_start->t0) / warm_start->h));
    const int M = warm_start->horizon();
    for (int i = 0; i < N; ++i) {
      const int src = static_cast<int>(std::min<long>(i + shift, M - 1));
      U[i] = warm_start->U[src];
    }
  }

  CqdcParams dyn = cfg.dynamics;
  dyn.h = h;
  dyn.kappa = cfg.ocp.kappa;
  ReferenceTrajectory traj = ddp_solve(q_now, std::move(U), cfg.ocp, cost,
                                       cqdc_dynamics(model, dyn));
  traj.t0 = t_now;
  return traj;
}

Mpc::Mpc(const SystemModel& model, MpcConfig cfg) : model_(model), cfg_(std::move(cfg)) {
  cfg_.ocp.validate(model.n_r());
}

const ReferenceTrajectory& Mpc::step(const VectorXd& q_now, double t_now) {
  ReferenceTrajectory traj =
      mpc_step(model_, q_now, t_now, cfg_, last_ ? &*last_ : nullptr);
  MpcTiming tm;
  tm.step = static_cast<int>(timing_.size());
  tm.t = t_now;
  tm.iterations = traj.iterations;
  tm.solve_time = traj.solve_time;
  tm.cost = traj.cost();
  tm.converged = traj.converged;
  timing_.push_back(tm);
  last_ = std::move(traj);
  return *last_;
}

void Mpc::reset() {
  last_.reset();
  timing_.clear();
}

InterpolatedReference interpolate_references(const ReferenceTrajectory& traj, int n_r,
                                             double t) {
  const int N = traj.horizon();
  if (N < 1) throw DimensionError("interpolate_references: empty trajectory");
  InterpolatedReference out;
  double s = (t - traj.t0) / traj.h;
  if (s < 0.0 || s > N) {
    out.clamped = true;
    s = std::clamp(s, 0.0, static_cast<double>(N));
  }
  const int i = std::min(static_cast<int>(std::floor(s)), N - 1);
  const double frac = s - i;
  const VectorXd& a = traj.X[i];
  const VectorXd& b = traj.X[i + 1];
  out.q_d = (1.0 - frac) * a.head(n_r) + frac * b.head(n_r);
  out.qd_dot = (b.head(n_r) - a.head(n_r)) / traj.h;
  if (static_cast<int>(traj.Lambda.size()) > i) {
    for (const auto& kc : traj.Lambda[i]) out.forces.push_back({kc.pair, kc.force_world, kc.phi});
  }
  return out;
}

}  // namespace cimpc
