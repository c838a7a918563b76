#include "cimpc/closed_loop.hpp"

#include <chrono>
#include <cmath>

#include "cimpc/kinematics.hpp"

namespace cimpc {

namespace {

int ratio(double fast, double slow, const char* what) {
  if (!(fast > 0.0) || !(slow > 0.0)) throw ConfigError(std::string(what) + ": rates must be positive");
  const double r = fast / slow;
  const long n = std::lround(r);
  if (n < 1 || std::abs(r - static_cast<double>(n)) > 1e-9 * r) {
    throw ConfigError(std::string(what) + ": rates do not divide evenly");
  }
  return static_cast<int>(n);
}

VectorXd commanded_object(const ObjectCommand& cmd, const VectorXd& q_o, double t) {
  if (!cmd.absolute) return q_o;
  return cmd.origin + cmd.rate * (t - cmd.t_origin);
}

std::vector<ForceMeasurement> as_measurements(const std::vector<ForceReference>& f) {
  std::vector<ForceMeasurement> out;
  out.reserve(f.size());
  for (const auto& r : f) out.push_back({r.pair, r.force_world});
  return out;
}

}  // namespace

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::Ours: return "ours";
    case ControllerKind::OpenLoop: return "open_loop";
    case ControllerKind::FfTorque: return "ff_torque";
    case ControllerKind::FfPos: return "ff_pos";
  }
  return "unknown";
}

ControllerKind controller_kind_from_string(const std::string& s) {
  if (s == "ours") return ControllerKind::Ours;
  if (s == "open_loop") return ControllerKind::OpenLoop;
  if (s == "ff_torque") return ControllerKind::FfTorque;
  if (s == "ff_pos") return ControllerKind::FfPos;
  throw ConfigError("unknown controller kind '" + s + "'");
}

void RateConfig::validate() const {
  ratio(sim_hz, control_hz, "sim/control");
  ratio(sim_hz, mpc_hz, "sim/mpc");
  ratio(control_hz, mpc_hz, "control/mpc");
}

int RateConfig::control_every() const { return ratio(sim_hz, control_hz, "sim/control"); }
int RateConfig::mpc_every() const { return ratio(sim_hz, mpc_hz, "sim/mpc"); }

RunLog run_closed_loop(const SystemModel& model, const ClosedLoopConfig& cfg,
                       ControllerKind kind, const VectorXd& q0, double duration) {
  cfg.rates.validate();
  require_size(q0.size(), model.n_q(), "closed loop q0");
  const auto wall_start = std::chrono::steady_clock::now();
  const int nr = model.n_r();
  const int no = model.n_o();

  SimParams sp = cfg.sim;
  sp.dt = 1.0 / cfg.rates.sim_hz;
  const Simulator sim(model, sp);
  Mpc mpc(model, cfg.mpc);
  ControllerConfig cc = cfg.controller;
  cc.dt = 1.0 / cfg.rates.control_hz;
  ContactController controller(model, cc);

  RunLog log;
  log.kind = to_string(kind);
  log.n_r = nr;
  log.n_o = no;
  log.dt_sim = sp.dt;

  const int ctrl_every = cfg.rates.control_every();
  const int mpc_every = cfg.rates.mpc_every();
  const long total = std::lround(duration * cfg.rates.sim_hz);

  std::vector<long> disturb_at;
  for (const auto& d : cfg.disturbances) {
    require_size(d.impulse.size(), no, "disturbance impulse");
    disturb_at.push_back(std::lround(d.t * cfg.rates.sim_hz));
  }
  const MatrixXd M_o_inv = sim.mass_matrix().bottomRightCorner(no, no).inverse();

  SimState state = sim.initial_state(q0);
  controller.reset(q0.head(nr));
  VectorXd q_d = q0.head(nr);
  VectorXd qd_dot = VectorXd::Zero(nr);
  std::vector<ForceMeasurement> F_ff;
  double t_tick = 0.0;
  int tick = 0;

  try {
    for (long i = 0; i < total; ++i) {
      const double t = static_cast<double>(i) * sp.dt;
      for (std::size_t k = 0; k < disturb_at.size(); ++k) {
        if (disturb_at[k] == i) state.qdot.tail(no) += M_o_inv * cfg.disturbances[k].impulse;
      }

      if (i % mpc_every == 0) {
        mpc.step(state.q, t);
        log.mpc_at.push_back(i);
      }

      if (i % ctrl_every == 0) {
        const ReferenceTrajectory& traj = *mpc.last();
        const InterpolatedReference ir = interpolate_references(traj, nr, t);
        const std::vector<ForceMeasurement> measured = sim.measure(state);
        VectorXd u0 = VectorXd::Zero(nr);
        double solve_time = 0.0;
        F_ff.clear();
        switch (kind) {
          case ControllerKind::Ours: {
            const ControllerOutput out = controller.step(state.q, measured, &traj, t);
            q_d = out.q_d;
            qd_dot = out.qd_dot;
            u0 = out.u0;
            solve_time = out.solve_time;
            break;
          }
          case ControllerKind::OpenLoop:
            q_d = ir.q_d;
            qd_dot = ir.qd_dot;
            break;
          case ControllerKind::FfTorque:
            q_d = ir.q_d;
            qd_dot = ir.qd_dot;
            F_ff = as_measurements(ir.forces);
            break;
          case ControllerKind::FfPos: {
            const KinematicsState kin = forward_kinematics(model, state.q);
            q_d = ir.q_d + feedforward_torque(model, kin, as_measurements(ir.forces)) / cfg.k_ctrl;
            qd_dot = ir.qd_dot;
            break;
          }
        }
        t_tick = t;
        log.ctrl_at.push_back(i);
        log.t.push_back(t);
        log.q.push_back(state.q);
        log.qdot.push_back(state.qdot);
        log.q_d.push_back(q_d);
        log.qd_dot.push_back(qd_dot);
        log.q_o_ref.push_back(commanded_object(cfg.mpc.command, state.q.tail(no), t));
        log.u0.push_back(u0);
        log.ctrl_solve_time.push_back(solve_time);
        for (const SimContact& c : sim.evaluate_contacts(state.q, state.qdot)) {
          if (model.role_of_frame(model.geometries()[c.pair.a].frame) != BodyRole::Robot) continue;
          ContactSample cs;
          cs.tick = tick;
          cs.t = t;
          cs.pair = c.pair;
          cs.phi = c.phi;
          cs.slip_sq = c.v_t.squaredNorm();
          cs.f_measured = -c.force_world;
          for (const auto& f : ir.forces) {
            if (f.pair == c.pair) cs.f_ref = f.force_world;
          }
          log.contacts.push_back(cs);
        }
        ++tick;
      }

      const VectorXd q_d_now = q_d + (t - t_tick) * qd_dot;
      const VectorXd tau = pd_torque(model, state.q, state.qdot, q_d_now, qd_dot, F_ff, cfg.pd);
      state = sim.step(state, tau);
      log.sim_steps = i + 1;
    }
  } catch (const Error& e) {
    log.aborted = true;
    log.abort_reason = e.what();
  }
  log.mpc = mpc.timing();
  log.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return log;
}

PlannerLog run_planner_loop(const SystemModel& model, const MpcConfig& cfg, const VectorXd& q0,
                            int steps, const StateHook& hook) {
  require_size(q0.size(), model.n_q(), "planner loop q0");
  const int no = model.n_o();
  const double h = cfg.ocp.h;
  CqdcParams plant = cfg.dynamics;
  plant.h = h;
  plant.kappa = cfg.ocp.kappa;
  plant.compute_gradients = false;

  PlannerLog log;
  for (const PairId& p : candidate_pairs(model)) {
    if (model.role_of_frame(model.geometries()[p.a].frame) == BodyRole::Robot) log.pairs.push_back(p);
  }
  auto record = [&](const VectorXd& q, double t) {
    const KinematicsState kin = forward_kinematics(model, q);
    std::vector<double> phis;
    for (const PairId& p : log.pairs) phis.push_back(evaluate_pair(model, kin, p).phi);
    log.t.push_back(t);
    log.q.push_back(q);
    log.q_o_ref.push_back(commanded_object(cfg.command, q.tail(no), t));
    log.phi.push_back(std::move(phis));
  };

  Mpc mpc(model, cfg);
  VectorXd q = q0;
  record(q, 0.0);
  try {
    for (int s = 0; s < steps; ++s) {
      const double t = s * h;
      if (hook) {
        hook(s, q);
        log.q.back() = q;
      }
      const ReferenceTrajectory& traj = mpc.step(q, t);
      log.cost_traces.push_back(traj.cost_trace);
      const SmoothStepResult r = step_dynamics(model, q, traj.U.front(), plant);
      log.prediction_error.push_back((traj.X[1] - r.q_next).lpNorm<Eigen::Infinity>());
      log.u.push_back(traj.U.front());
      q = r.q_next;
      if (!q.allFinite()) throw SolverError("planner loop state became non-finite");
      record(q, t + h);
    }
  } catch (const Error& e) {
    log.aborted = true;
    log.abort_reason = e.what();
  }
  log.mpc = mpc.timing();
  return log;
}

}  // namespace cimpc
