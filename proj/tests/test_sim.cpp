#include <gtest/gtest.h>

#include "support.hpp"

namespace cimpc {
namespace {

// Unit-mass ball free to move in the vertical x-z plane above a floor.
SystemModel ball_on_floor(double damping) {
  ModelSpec s = test::single_joint_spec();
  s.object.kind = ObjectJointKind::PlanarFree;
  s.object.plane_x = Vector3d::UnitX();
  s.object.plane_y = Vector3d::UnitZ();
  s.object.damping = VectorXd::Constant(3, damping);
  MatrixXd M = MatrixXd::Identity(3, 3);
  M(2, 2) = 0.004;
  s.object.inertia = M;
  s.object.mass = 1.0;
  s.gravity = Vector3d(0.0, 0.0, -9.81);
  s.geometries.push_back({"floor", "world", HalfSpace{Vector3d(0.0, 0.0, -0.1), Vector3d::UnitZ()}});
  return SystemModel(s);
}

TEST(Pd, ZeroErrorGivesZeroTorque) {
  const SystemModel m = test::rotz_model();
  const VectorXd q = test::nominal_q(m), qd = VectorXd::Zero(m.n_q());
  PdGains g;
  g.gravity_comp = false;
  const VectorXd tau = pd_torque(m, q, qd, q.head(6), VectorXd::Zero(6), {}, g);
  EXPECT_EQ(tau.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Pd, ProportionalTerm) {
  const SystemModel m = test::rotz_model();
  const VectorXd q = test::nominal_q(m), qd = VectorXd::Zero(m.n_q());
  PdGains g;
  g.k_p = 100.0;
  g.gravity_comp = false;
  VectorXd q_d = q.head(6);
  q_d[3] += 0.01;
  const VectorXd tau = pd_torque(m, q, qd, q_d, VectorXd::Zero(6), {}, g);
  EXPECT_NEAR(tau[3], 1.0, 1e-12);
  EXPECT_EQ(tau.cwiseAbs().maxCoeff(), std::abs(tau[3]));
}

TEST(Pd, PositionOffsetEqualsFeedForwardTorque) {
  const SystemModel m = test::rotz_model();
  const VectorXd q = test::nominal_q(m);
  const auto contacts = detect_contacts(m, q, 0.02);
  std::vector<ForceMeasurement> F;
  for (const auto& c : contacts) F.push_back({c.pair, -0.7 * c.normal + Vector3d(0.1, -0.2, 0.0)});
  PdGains g;
  const VectorXd qd = VectorXd::Zero(m.n_q());
  const VectorXd ff = feedforward_torque(m, forward_kinematics(m, q), F);
  const VectorXd a = pd_torque(m, q, qd, q.head(6), VectorXd::Zero(6), F, g);
  const VectorXd b = pd_torque(m, q, qd, q.head(6) + ff / g.k_p, VectorXd::Zero(6), {}, g);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pd, GravityCompensationHoldsStaticPose) {
  const SystemModel m = test::spatial_model(9.81);
  const VectorXd q = VectorXd::Constant(m.n_q(), 0.2);
  SimParams sp;
  Simulator sim(m, sp);
  SimState s = sim.initial_state(q);
  PdGains g;
  const VectorXd tau = pd_torque(m, s.q, s.qdot, q.head(m.n_r()), VectorXd::Zero(m.n_r()), {}, g);
  const SimState n = sim.step(s, tau);
  EXPECT_LT(n.qdot.head(m.n_r()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Simulator, RestsWithoutContactOrTorque) {
  const SystemModel m(test::single_joint_spec());
  Simulator sim(m, SimParams{});
  SimState s = sim.initial_state(VectorXd::Constant(m.n_q(), 0.1));
  for (int i = 0; i < 100; ++i) s = sim.step(s, VectorXd::Zero(m.n_r()));
  EXPECT_EQ(s.q, VectorXd::Constant(m.n_q(), 0.1));
  EXPECT_EQ(s.qdot.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Simulator, BallRestsAtForceBalancePenetration) {
  const SystemModel m = ball_on_floor(40.0);
  SimParams sp;
  Simulator sim(m, sp);
  SimState s = sim.initial_state(VectorXd::Zero(m.n_q()));
  for (int i = 0; i < 40000; ++i) s = sim.step(s, VectorXd::Zero(m.n_r()));
  const auto contacts = sim.evaluate_contacts(s.q, s.qdot);
  ASSERT_EQ(contacts.size(), 1u);
  // Root of sigma k softplus(-phi / sigma) = m g by bisection.
  const CompliantParams& p = sp.contact;
  double lo = -0.1, hi = 0.1;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (normal_force(mid, 0.0, p) > 9.81 ? lo : hi) = mid;
  }
  EXPECT_NEAR(contacts[0].phi, 0.5 * (lo + hi), 1e-8);
}

TEST(Simulator, PassiveEnergyDoesNotIncrease) {
  const SystemModel m = test::rotz_model();
  SimParams sp;
  sp.dt = 1e-5;
  Simulator sim(m, sp);
  VectorXd q = test::nominal_q(m);
  for (int f = 0; f < 3; ++f) test::set_finger_gap(m, q, f, 5e-4);
  SimState s = sim.initial_state(q);
  std::mt19937 rng(109);
  s.qdot.head(6) = test::random_vec(rng, 6, 0.5);
  s.qdot[6] = 2.0;
  double e = sim.energy(s);
  double worst = 0.0;
  bool touched = false;
  for (int i = 0; i < 20000; ++i) {
    s = sim.step(s, VectorXd::Zero(6));
    const double en = sim.energy(s);
    worst = std::max(worst, (en - e) / std::max(std::abs(e), 1e-12));
    touched = touched || !s.contacts.empty();
    e = en;
  }
  EXPECT_TRUE(touched);
  EXPECT_LT(worst, 1e-6);
}

TEST(Simulator, ParamsValidate) {
  SimParams sp;
  sp.dt = 0.0;
  EXPECT_THROW(sp.validate(), ConfigError);
}

Scenario short_scenario(const std::vector<std::string>& extra = {}) {
  std::vector<std::string> ov{"duration=0.3"};
  ov.insert(ov.end(), extra.begin(), extra.end());
  return load_scenario(test::scenario_path("planar_rotz.json"), ov);
}

TEST(ClosedLoop, SchedulingCounters) {
  const Scenario sc = short_scenario();
  const RunLog log = run_closed_loop(*sc.model, sc.loop, ControllerKind::Ours, sc.q0, sc.duration);
  ASSERT_FALSE(log.aborted) << log.abort_reason;
  EXPECT_EQ(log.sim_steps, 600);
  ASSERT_EQ(log.ctrl_at.size(), 30u);
  ASSERT_EQ(log.mpc_at.size(), 6u);
  for (std::size_t i = 1; i < log.ctrl_at.size(); ++i) EXPECT_EQ(log.ctrl_at[i] - log.ctrl_at[i - 1], 20);
  for (std::size_t i = 1; i < log.mpc_at.size(); ++i) EXPECT_EQ(log.mpc_at[i] - log.mpc_at[i - 1], 100);
  EXPECT_EQ(sc.loop.rates.control_every(), 20);
  EXPECT_EQ(sc.loop.rates.mpc_every(), 100);
}

TEST(ClosedLoop, Deterministic) {
  const Scenario sc = short_scenario();
  for (ControllerKind k : {ControllerKind::Ours, ControllerKind::FfPos}) {
    const RunLog a = run_closed_loop(*sc.model, sc.loop, k, sc.q0, sc.duration);
    const RunLog b = run_closed_loop(*sc.model, sc.loop, k, sc.q0, sc.duration);
    ASSERT_EQ(a.q.size(), b.q.size());
    for (std::size_t i = 0; i < a.q.size(); ++i) {
      EXPECT_EQ(a.q[i], b.q[i]);
      EXPECT_EQ(a.qdot[i], b.qdot[i]);
      EXPECT_EQ(a.q_d[i], b.q_d[i]);
    }
    ASSERT_EQ(a.contacts.size(), b.contacts.size());
    for (std::size_t i = 0; i < a.contacts.size(); ++i) EXPECT_EQ(a.contacts[i].slip_sq, b.contacts[i].slip_sq);
  }
}

TEST(ClosedLoop, DisturbanceImpulseOnObject) {
  const Scenario base = short_scenario();
  const Scenario hit = short_scenario({"disturbances=[{\"t\":0.15,\"impulse\":[1e-4]}]"});
  ASSERT_EQ(hit.loop.disturbances.size(), 1u);
  const RunLog a = run_closed_loop(*base.model, base.loop, ControllerKind::OpenLoop, base.q0, base.duration);
  const RunLog b = run_closed_loop(*hit.model, hit.loop, ControllerKind::OpenLoop, hit.q0, hit.duration);
  ASSERT_EQ(a.t.size(), b.t.size());
  for (std::size_t i = 0; i < a.t.size(); ++i) {
    if (a.t[i] < 0.15 - 1e-12) {
      EXPECT_EQ(a.q[i], b.q[i]) << a.t[i];
    } else if (a.t[i] > 0.15 + 1e-9) {
      EXPECT_GT(b.q[i][6] - a.q[i][6], 0.0) << a.t[i];
    }
  }
}

TEST(ClosedLoop, BadRatesAreConfigErrors) {
  RateConfig r;
  r.control_hz = 300.0;
  EXPECT_THROW(r.validate(), ConfigError);
  EXPECT_THROW(controller_kind_from_string("magic"), ConfigError);
  EXPECT_EQ(controller_kind_from_string(to_string(ControllerKind::FfTorque)), ControllerKind::FfTorque);
}

TEST(PlannerLoop, PlantEqualsModelSoPredictionIsExact) {
  const Scenario sc = load_scenario(test::scenario_path("planar_rotz.json"));
  const PlannerLog log = run_planner_loop(*sc.model, sc.loop.mpc, sc.q0, 4);
  ASSERT_FALSE(log.aborted);
  ASSERT_EQ(log.q.size(), 5u);
  for (double e : log.prediction_error) EXPECT_LT(e, 1e-12);
}

}  // namespace
}  // namespace cimpc
