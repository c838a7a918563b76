// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. `--only N` (repeatable) restricts the run.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "support.hpp"
#include "tracking_support.hpp"

using namespace cimpc;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1: cone membership and centrality of the duals.
Outcome barrier_duals() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(1001);
  std::uniform_int_distribution<int> nq(1, 12), nc(1, 6);
  double worst_cone = -1e300, worst_central = 0.0;
  const int instances = 1200;
  for (int i = 0; i < instances; ++i) {
    const double kappa = std::array<double, 3>{10.0, 100.0, 1000.0}[static_cast<std::size_t>(i % 3)];
    const QdProblem p = test::random_qd_problem(rng, nq(rng), nc(rng), kappa);
    const BarrierSolution s = barrier_solve(p);
    const auto lambda = extract_duals(p, s.v);
    const auto force = dual_forces(p, lambda);  // (mu l_t, l_n)
    for (std::size_t c = 0; c < p.contacts.size(); ++c) {
      const ContactInfo& ci = p.contacts[c];
      const Vector3d jv = ci.J * s.v;
      const Vector3d sigma(jv[0] + p.phi[static_cast<Eigen::Index>(c)] / p.h, ci.mu * jv[1], ci.mu * jv[2]);
      const Vector3d& l = lambda[c];
      worst_cone = std::max(worst_cone, force[c].head<2>().norm() - ci.mu * force[c][2]);
      worst_central = std::max(worst_central, std::abs(l.dot(sigma) - 2.0 / kappa) / (2.0 / kappa));
    }
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = worst_cone <= 1e-9 && worst_central <= 1e-6 && t < 60.0;
  o.detail = std::to_string(instances) + " instances, max(|f_t|-mu f_n) " + fmt_num(worst_cone) +
             ", centrality rel " + fmt_num(worst_central) + ", " + fmt_num(t) + " s";
  return o;
}

// 2: analytic step gradients against central differences.
Outcome smoothed_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int checked = 0, without_contact = 0;
  for (const SystemModel& m : {test::rotz_model(), test::free_model()}) {
    std::mt19937 rng(2002);
    for (int i = 0; i < 60; ++i) {
      const test::StepInstance in = test::contact_rich_instance(m, rng);
      const test::GradientCheck g = test::check_step_gradients(m, in);
      worst = std::max({worst, g.err_x, g.err_u});
      without_contact += g.contacts == 0;
      ++checked;
    }
  }
  const SystemModel m = test::rotz_model();
  VectorXd q = test::nominal_q(m);
  for (int f = 0; f < 3; ++f) q[2 * f + 1] = -2.4;
  CqdcParams p;
  p.phi_max = 0.02;
  const SmoothStepResult r = step_dynamics(m, q, VectorXd::Constant(m.n_r(), 0.02), p);
  MatrixXd expect = MatrixXd::Zero(m.n_q(), m.n_r());
  expect.topRows(m.n_r()).setIdentity();
  const double free_err = r.contacts.empty() ? (r.f_u - expect).cwiseAbs().maxCoeff() : 1.0;
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = checked >= 100 && without_contact == 0 && worst < 1e-3 && free_err <= 1e-10 && t < 120.0;
  o.detail = std::to_string(checked) + " instances, max rel err " + fmt_num(worst) +
             ", contact-free |f_u - I| " + fmt_num(free_err) + ", " + fmt_num(t) + " s";
  return o;
}

// 3: objective gap against a continuation solve at kappa = 1e9.
Outcome barrier_gap() {
  std::mt19937 rng(3003);
  std::uniform_int_distribution<int> nq(2, 12), nc(1, 6);
  double worst_ratio = 0.0;
  int violations = 0;
  for (int i = 0; i < 50; ++i) {
    const double kappa = std::array<double, 4>{10.0, 100.0, 1000.0, 1e6}[static_cast<std::size_t>(i % 4)];
    QdProblem p = test::random_qd_problem(rng, nq(rng), nc(rng), kappa);
    const double v_at = quadratic_objective(p, barrier_solve(p).v);
    QdProblem ref = p;
    VectorXd v = VectorXd::Zero(p.Q.rows());
    for (double k = 10.0; k <= 1e9 * 1.0001; k *= 10.0) {
      ref.kappa = k;
      v = barrier_solve(ref, v, 200).v;
    }
    const double gap = std::abs(v_at - quadratic_objective(ref, v));
    const double bound = 2.0 * static_cast<double>(p.contacts.size()) / kappa;
    worst_ratio = std::max(worst_ratio, gap / bound);
    violations += gap > bound;
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = "50 instances, max gap / (2 N_c / kappa) " + fmt_num(worst_ratio);
  return o;
}

DynamicsFn linear_dynamics(const MatrixXd& A, const MatrixXd& B, const VectorXd& c) {
  return [A, B, c](const VectorXd& x, const VectorXd& u, bool grad) {
    StepEval e;
    e.x_next = A * x + B * u + c;
    if (grad) {
      e.f_x = A;
      e.f_u = B;
    }
    return e;
  };
}

// 4: unconstrained DDP equals Riccati; with bounds, feasibility and monotone cost.
Outcome ddp_oracle() {
  std::mt19937 rng(4004);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const int nr = 2 + trial % 3, no = 1 + trial % 2, N = 6 + trial % 5, nx = nr + no;
    const MatrixXd A = MatrixXd::Identity(nx, nx) + 0.1 * test::random_vec(rng, nx * nx).reshaped(nx, nx);
    const MatrixXd B = test::random_vec(rng, nx * nr).reshaped(nx, nr);
    const VectorXd c = test::random_vec(rng, nx, 0.01);
    CostConfig cost;
    cost.W_r = test::random_spd(rng, nr, 0.1, 2.0);
    cost.W_o = test::random_spd(rng, no, 0.5, 5.0);
    cost.W_u = test::random_spd(rng, nr, 0.5, 2.0);
    cost.gamma_r = 1.0 + trial % 4;
    cost.tail_knots = trial % 3;
    cost.q_r_ref = {test::random_vec(rng, nr, 0.3)};
    for (int k = 0; k <= N; ++k) cost.q_o_ref.push_back(test::random_vec(rng, no, 0.3));
    OcpConfig ocp;
    ocp.N = N;
    ocp.u_lo = VectorXd::Constant(nr, -1e6);
    ocp.u_hi = VectorXd::Constant(nr, 1e6);
    ocp.ddp.max_iters = 50;
    ocp.ddp.cost_tol = 1e-14;
    const VectorXd x0 = test::random_vec(rng, nx, 0.3);
    const ReferenceTrajectory t =
        ddp_solve(x0, std::vector<VectorXd>(static_cast<std::size_t>(N), VectorXd::Zero(nr)), ocp,
                  cost, linear_dynamics(A, B, c));
    std::vector<MatrixXd> Qk;
    std::vector<VectorXd> r;
    for (int k = 0; k <= N; ++k) {
      MatrixXd Q = MatrixXd::Zero(nx, nx);
      Q.topLeftCorner(nr, nr) = cost.W_r_at(k);
      Q.bottomRightCorner(no, no) = cost.W_o;
      Qk.push_back(Q);
      VectorXd ref(nx);
      ref << cost.q_r_ref_at(k), cost.q_o_ref[static_cast<std::size_t>(k)];
      r.push_back(ref);
    }
    const auto U = test::riccati_oracle(A, B, c, Qk, r, cost.W_u, x0);
    for (int k = 0; k < N; ++k) worst = std::max(worst, (t.U[k] - U[k]).cwiseAbs().maxCoeff());
  }

  const Scenario sc = load_scenario(test::scenario_path("planar_rotz.json"));
  bool feasible = true, monotone = true;
  std::size_t iterations = 0;
  for (double rate : {0.3, 1.0, 3.0}) {
    MpcConfig cfg = sc.loop.mpc;
    cfg.command.rate = VectorXd::Constant(1, rate);
    const ReferenceTrajectory t = mpc_step(*sc.model, sc.q0, 0.0, cfg, nullptr);
    for (const auto& u : t.U) {
      feasible = feasible && ((u - cfg.ocp.u_hi).array() <= 0.0).all() && ((u - cfg.ocp.u_lo).array() >= 0.0).all();
    }
    for (std::size_t i = 1; i < t.cost_trace.size(); ++i) monotone = monotone && t.cost_trace[i] <= t.cost_trace[i - 1];
    iterations += t.cost_trace.size();
  }
  Outcome o;
  o.pass = worst <= 1e-6 && feasible && monotone && iterations > 3;
  o.detail = "max |U - U_riccati| " + fmt_num(worst) + "; bounded contact problem: " +
             (feasible ? "feasible" : "INFEASIBLE") + ", cost " + (monotone ? "monotone" : "NOT monotone");
  return o;
}

int finger_root(const SystemModel& m, int frame) {
  while (frame >= 0 && m.joints()[static_cast<std::size_t>(frame)].parent >= 0) {
    frame = m.joints()[static_cast<std::size_t>(frame)].parent;
  }
  return frame;
}

// 5: finger gaiting on the hinged disk.
Outcome gait() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario sc = load_scenario(test::scenario_path("planar_rotz.json"));
  const GaitResult g = run_gait(sc);
  const SystemModel& m = *sc.model;
  std::map<int, int> breaks;
  for (int j = 0; j < m.n_r(); ++j) {
    if (m.joints()[static_cast<std::size_t>(j)].parent < 0) breaks[j] = 0;
  }
  const ContactTimeline& tl = g.metrics.timeline;
  for (std::size_t p = 0; p < tl.pairs.size(); ++p) {
    const int frame = m.geometries()[static_cast<std::size_t>(tl.pairs[p].a)].frame;
    breaks[finger_root(m, frame)] += tl.breaks[p];
  }
  int min_breaks = std::numeric_limits<int>::max();
  std::string per;
  for (const auto& [root, n] : breaks) {
    min_breaks = std::min(min_breaks, n);
    per += (per.empty() ? "" : "/") + std::to_string(n);
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = !g.log.aborted && g.log.u.size() == static_cast<std::size_t>(sc.gait.steps) && sc.gait.steps == 200 &&
           g.metrics.avg_rotation_speed >= 0.15 && min_breaks >= 2 && t < 300.0;
  o.detail = "mean rotation " + fmt_num(g.metrics.avg_rotation_speed) + " rad/s, breaks per finger " + per +
             ", " + fmt_num(t) + " s";
  return o;
}

// 6: larger kappa, slower rotation.
Outcome kappa_trend() {
  const Scenario sc = load_scenario(test::scenario_path("planar_rotz.json"));
  const KappaSweepResult r = run_kappa_sweep(sc);
  int inversions = 0;
  std::string speeds;
  for (std::size_t i = 0; i < r.kappas.size(); ++i) {
    speeds += (i ? ", " : "") + fmt_num(r.kappas[i]) + ": " + fmt_num(r.rotation_speed[i]);
    if (i > 0 && r.rotation_speed[i] > r.rotation_speed[i - 1]) ++inversions;
  }
  const bool expected_grid = r.kappas == std::vector<double>{100.0, 500.0, 1000.0, 10000.0} && sc.kappa_sweep.steps == 50;
  Outcome o;
  o.pass = expected_grid && r.rotation_speed.front() > r.rotation_speed.back() && inversions <= 1;
  o.detail = "speed (" + speeds + "), inversions " + std::to_string(inversions);
  return o;
}

// 7: slippage and rotation ordering in the verification simulator.
Outcome controller_compare() {
  const Scenario sc = load_scenario(test::scenario_path("planar_rotz.json"));
  const auto rows = run_controller_compare(sc);
  const CompareRow* ours = nullptr;
  for (const auto& r : rows) {
    if (r.kind == ControllerKind::Ours) ours = &r;
  }
  Outcome o;
  if (!ours || rows.size() != 4 || sc.compare.duration != 10.0) {
    o.pass = false;
    o.detail = "expected four 10 s runs including ours";
    return o;
  }
  for (const auto& r : rows) {
    o.detail += (o.detail.empty() ? "" : "; ") + to_string(r.kind) + " slip " +
                fmt_num(r.metrics.slippage.value) + " rot " + fmt_num(r.metrics.avg_rotation_speed);
    o.pass = o.pass && !r.log.aborted;
    if (r.kind == ControllerKind::Ours) continue;
    o.pass = o.pass && ours->metrics.slippage.value < r.metrics.slippage.value;
    if (r.kind == ControllerKind::OpenLoop) {
      o.pass = o.pass && ours->metrics.avg_rotation_speed > r.metrics.avg_rotation_speed;
    }
  }
  return o;
}

// 8: tracking controller on its own linear plant.
Outcome tracking_fidelity() {
  const Scenario sc = load_scenario(test::scenario_path("planar_rotz.json"));
  const ControllerConfig& cc = sc.loop.controller;
  const int horizon = cc.N;
  const TrackingWeights w;  // library defaults
  std::mt19937 rng(8008);
  std::uniform_real_distribution<double> base(-0.1, 0.1), gap(-5e-4, 2e-3), tang(-0.05, 0.05), normal(0.1, 0.5);
  double worst_xi = 0.0, worst_F = 0.0;
  int worst_steps = 0, sets = 0;
  for (const SystemModel& m : {test::rotz_model(), test::free_model()}) {
    for (int trial = 0; trial < 10; ++trial) {
      VectorXd q = test::nominal_q(m);
      for (int f = 0; f < m.n_r() / 2; ++f) {
        q[2 * f] += base(rng);
        test::set_finger_gap(m, q, f, gap(rng));
      }
      const StiffnessSet ss = test::pressed_stiffness(m, q, cc.contact);
      if (ss.size() == 0) continue;
      ++sets;
      VectorXd F0(3 * ss.size());
      for (int c = 0; c < ss.size(); ++c) F0.segment<3>(3 * c) << tang(rng), tang(rng), normal(rng);
      for (ObjectMode mode : {ObjectMode::Anchored, ObjectMode::Free}) {
        const LinearPlant plant = assemble_plant(ss, m.n_r(), cc.k_p, cc.k_d, mode, 0.01);
        const test::ConvergenceRun r = test::track_set_point(plant, q.head(m.n_r()), F0,
                                                             test::random_vec(rng, m.n_r(), 0.02), w,
                                                             horizon, 2 * horizon);
        worst_xi = std::max(worst_xi, r.xi_ratio);
        worst_F = std::max(worst_F, r.F_ratio);
        worst_steps = std::max(worst_steps, r.first_within < 0 ? 1 << 20 : r.first_within);
      }
    }
  }

  const SystemModel m = test::rotz_model();
  const VectorXd q = test::pressed_q(m, -1e-4);
  const StiffnessSet ss = test::pressed_stiffness(m, q, cc.contact);
  const LinearPlant plant = assemble_plant(ss, m.n_r(), cc.k_p, cc.k_d, ObjectMode::Anchored, 0.01);
  const int nr = m.n_r(), nf = 3 * ss.size(), nx = plant.n_x();
  double worst_qp = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int N = 3 + trial % 10;
    const VectorXd x0 = test::equilibrium_state(plant, q.head(nr), test::random_vec(rng, nf, 0.5)) +
                        test::random_vec(rng, nx, 0.01);
    TrackingReference ref;
    for (int k = 0; k <= N; ++k) {
      ref.xi_ref.push_back(q.head(nr) + test::random_vec(rng, nr, 0.02));
      ref.F_ref.push_back(test::random_vec(rng, nf, 0.3));
      if (k < N) ref.u_ref.push_back(test::random_vec(rng, nr, 0.05));
    }
    ref.F_weight = VectorXd::Ones(nf);
    for (int i = 0; i < nf; ++i) ref.F_weight[i] = (trial + i) % 4 == 0 ? 0.0 : 1.0;
    const TrackingSolution sol = tracking_solve({x0.head(nr), x0.segment(nr, nr), x0.tail(nf)}, plant, ref, w);
    const auto U = test::dense_tracking_oracle(x0, plant, ref, w);
    for (int k = 0; k < N; ++k) worst_qp = std::max(worst_qp, (sol.U[k] - U[k]).cwiseAbs().maxCoeff());
  }
  Outcome o;
  o.pass = sets > 0 && worst_xi < 0.01 && worst_F < 0.01 && worst_steps <= 2 * horizon && worst_qp <= 1e-8;
  o.detail = std::to_string(sets) + " contact sets x 2 modes, after " + std::to_string(2 * horizon) +
             " steps max ratio xi " + fmt_num(worst_xi) + " F " + fmt_num(worst_F) +
             ", slowest within 1% at step " + std::to_string(worst_steps) + "; dense QP " + fmt_num(worst_qp);
  return o;
}

// 9: compliant contact model.
Outcome compliant_properties() {
  const CompliantParams p;
  double jump = 0.0;
  for (double at : {0.0, 2.0 * p.v_d}) {
    const double below = dissipation(std::nextafter(at, -1.0), p.v_d);
    const double above = dissipation(std::nextafter(at, 1.0), p.v_d);
    const double mid = dissipation(at, p.v_d);
    jump = std::max({jump, std::abs(above - below), std::abs(mid - below), std::abs(mid - above)});
  }
  const bool exact = normal_force(0.0, 0.0, p) == p.sigma * p.k * std::numbers::ln2;
  double slope_err = 0.0;
  for (int i = -40; i <= 40; ++i) {
    const double phi = i * 0.25 * p.sigma;
    const double eps = 1e-3 * p.sigma;
    const double fd = (normal_force(phi + eps, 0.0, p) - normal_force(phi - eps, 0.0, p)) / (2 * eps);
    slope_err = std::max(slope_err, std::abs(normal_force_slope(phi, p) - fd) / std::abs(fd));
  }
  const SystemModel m = test::spatial_model();
  std::mt19937 rng(9009);
  double asym = 0.0, min_eig = 0.0;
  int sets = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const VectorXd q = test::random_vec(rng, m.n_q(), 0.4);
    const StiffnessSet ss = build_stiffness_set(detect_contacts(m, q, 0.3), m.n_r(), p);
    if (ss.size() == 0) continue;
    ++sets;
    const double scale = 1.0 + ss.K_o.cwiseAbs().maxCoeff();
    asym = std::max(asym, (ss.K_o - ss.K_o.transpose()).cwiseAbs().maxCoeff() / scale);
    Eigen::SelfAdjointEigenSolver<Matrix6d> es(ss.K_o);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff() / scale);
  }
  Outcome o;
  o.pass = jump < 1e-12 && exact && slope_err < 1e-6 && sets >= 50 && asym < 1e-15 && min_eig > -1e-10;
  o.detail = "d_n jump " + fmt_num(jump) + ", f_n(0,0) " + (exact ? "exact" : "NOT exact") + ", slope rel " +
             fmt_num(slope_err) + ", K_o on " + std::to_string(sets) + " sets: asym " + fmt_num(asym) +
             " min eig " + fmt_num(min_eig);
  return o;
}

// 10: disturbance recovery on the free disk.
Outcome robustness() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario sc = load_scenario(test::scenario_path("planar_free.json"));
  const RobustnessResult r = run_robustness(sc);
  bool monotone = true;
  std::string errs;
  for (std::size_t i = 0; i < r.mean_error.size(); ++i) {
    errs += (i ? ", " : "") + fmt_num(r.magnitudes[i]) + ": " + fmt_num(r.mean_error[i]);
    if (i > 0 && r.mean_error[i] < r.mean_error[i - 1]) monotone = false;
  }
  const bool shape = sc.robustness.seeds == 50 && sc.robustness.steps == 100 &&
                     sc.metrics.recover_threshold == 0.05 && !r.recovered_fraction.empty();
  Outcome o;
  o.pass = shape && monotone && r.recovered_fraction.front() >= 0.8;
  o.detail = "mean error (" + errs + "), recovered at smallest " +
             fmt_num(r.recovered_fraction.empty() ? 0.0 : r.recovered_fraction.front()) + ", " +
             fmt_num(seconds_since(t0)) + " s";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only.insert(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: %s [--only N]...\n", argv[0]);
      return 2;
    }
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"barrier/dual invariants", barrier_duals},
      {"smoothed-gradient check", smoothed_gradients},
      {"barrier-gap bound", barrier_gap},
      {"DDP-LQR oracle", ddp_oracle},
      {"gait emergence", gait},
      {"kappa trend", kappa_trend},
      {"controller comparison", controller_compare},
      {"low-level fidelity", tracking_fidelity},
      {"compliant-model properties", compliant_properties},
      {"robustness", robustness},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("[%s] criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
