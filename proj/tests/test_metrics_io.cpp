#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"

namespace cimpc {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cimpc_test_" + name);
  fs::remove_all(p);
  return p;
}

ContactSample sample(double phi, double slip) {
  ContactSample s;
  s.phi = phi;
  s.slip_sq = slip;
  return s;
}

TEST(Slippage, StickingContactsGiveZero) {
  const auto r = slippage_metric({sample(0.0, 0.0), sample(-1e-4, 0.0)}, -2000.0, 1e-3);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.samples, 2);
}

TEST(Slippage, SingleSampleAtZeroDistance) {
  EXPECT_DOUBLE_EQ(slippage_metric({sample(0.0, 0.01)}, -2000.0, 1e-3).value, 0.005);
}

TEST(Slippage, HandComputedThreeSamples) {
  // phi (m), |v_t|^2 (m^2/s^2); the 2 mm sample is outside the 1 mm gate.
  const std::vector<ContactSample> s{sample(-5e-4, 4e-4), sample(2.5e-4, 9e-4), sample(2e-3, 1.0)};
  const double w1 = 1.0 / (1.0 + std::exp(-1.0));  // sigmoid(-2000 * -5e-4)
  const double w2 = 1.0 / (1.0 + std::exp(0.5));   // sigmoid(-2000 * 2.5e-4)
  const double oracle = (w1 * 4e-4 + w2 * 9e-4) / 2.0;
  const auto r = slippage_metric(s, -2000.0, 1e-3);
  EXPECT_NEAR(r.value, oracle, 1e-12 * oracle);
  EXPECT_EQ(r.samples, 2);
  EXPECT_FALSE(r.empty);
  EXPECT_THROW(slippage_metric(s, 10.0, 1e-3), ConfigError);
}

TEST(Slippage, SigmoidIsStable) {
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
}

TEST(Timeline, CountsUpwardCrossings) {
  const std::vector<double> t{0, 1, 2, 3, 4, 5, 6};
  const std::vector<std::vector<double>> phi{{0.01}, {0.001}, {0.002}, {0.01}, {0.0}, {0.005}, {0.001}};
  const ContactTimeline tl = contact_timeline(t, phi, {{0, 1}}, 3e-3);
  ASSERT_EQ(tl.breaks.size(), 1u);
  EXPECT_EQ(tl.breaks[0], 2);
  ASSERT_EQ(tl.intervals.size(), 3u);
  EXPECT_EQ(tl.intervals[0].t_start, 1.0);
  EXPECT_EQ(tl.intervals[0].t_end, 3.0);
  EXPECT_EQ(tl.intervals[2].t_start, 6.0);
}

TEST(Csv, DoublesRoundTrip) {
  std::mt19937 rng(113);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, (i % 40) - 20);
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(Csv, EscapeAndParse) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  const fs::path dir = fresh_dir("csv");
  fs::create_directories(dir);
  const std::string path = (dir / "x.csv").string();
  {
    CsvWriter w(path, {"name", "value"});
    w.row(std::vector<std::string>{"a,b", "1"});
    w.row(std::vector<std::string>{"line\nbreak", "\"q\""});
    EXPECT_THROW(w.row(std::vector<std::string>{"only"}), DimensionError);
  }
  const CsvTable t = read_csv(path);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "a,b");
  EXPECT_EQ(t.rows[1][0], "line\nbreak");
  EXPECT_EQ(t.rows[1][t.column("value")], "\"q\"");
  EXPECT_THROW(t.column("missing"), Error);
}

TEST(Csv, RunLogSchema) {
  const std::vector<std::string> traj{"t", "q_0", "q_1", "q_2", "qdot_0", "qdot_1", "qdot_2",
                                      "q_d_0", "q_d_1", "qd_dot_0", "qd_dot_1", "q_o_ref_0"};
  EXPECT_EQ(trajectory_columns(2, 1), traj);
  const std::vector<std::string> contacts{"tick", "t", "pair_a", "pair_b", "phi", "slip_sq",
                                          "f_meas_x", "f_meas_y", "f_meas_z", "f_ref_x", "f_ref_y", "f_ref_z"};
  EXPECT_EQ(contact_columns(), contacts);
  const std::vector<std::string> ctrl{"t", "xi_0", "xi_1", "xi_d_0", "xi_d_1", "u0_0", "u0_1", "solve_time"};
  EXPECT_EQ(controller_columns(2), ctrl);
}

TEST(Scenario, OverridesAndHash) {
  nlohmann::json j{{"a", {{"b", 1}}}};
  apply_override(j, "a.b=2.5");
  apply_override(j, "a.c=[1,2]");
  apply_override(j, "name=hello world");
  EXPECT_EQ(j["a"]["b"], 2.5);
  EXPECT_EQ(j["a"]["c"].size(), 2u);
  EXPECT_EQ(j["name"], "hello world");
  EXPECT_THROW(apply_override(j, "novalue"), ConfigError);
  const Scenario a = load_scenario(test::scenario_path("planar_rotz.json"));
  const Scenario b = load_scenario(test::scenario_path("planar_rotz.json"), {"ocp.kappa=500"});
  EXPECT_NE(a.config_hash(), b.config_hash());
  EXPECT_EQ(a.config_hash(), load_scenario(test::scenario_path("planar_rotz.json")).config_hash());
  EXPECT_EQ(b.loop.mpc.ocp.kappa, 500.0);
  EXPECT_EQ(a.kappa_sweep.kappas.size(), 4u);
  EXPECT_EQ(a.kappa_sweep.steps, 50);
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
}

TEST(Scenario, ConfigErrors) {
  EXPECT_THROW(load_scenario("/nonexistent.json"), ConfigError);
  EXPECT_THROW(load_scenario(test::scenario_path("planar_rotz.json"), {"controller=bogus"}), ConfigError);
  EXPECT_THROW(load_scenario(test::scenario_path("planar_rotz.json"), {"rates.control_hz=300"}), ConfigError);
  EXPECT_THROW(load_scenario(test::scenario_path("planar_rotz.json"), {"q0=[1,2]"}), Error);
}

TEST(RunLogFiles, RoundTripRecomputesIdenticalMetrics) {
  const Scenario sc = load_scenario(test::scenario_path("planar_rotz.json"), {"duration=0.3"});
  const RunLog log = run_closed_loop(*sc.model, sc.loop, ControllerKind::Ours, sc.q0, sc.duration);
  const MetricsReport m = compute_metrics(log, sc.metrics);
  const fs::path dir = fresh_dir("runlog");
  write_run_log(dir.string(), log, sc, m);
  for (const char* f : {"trajectory.csv", "contacts.csv", "controller.csv", "mpc_timing.json",
                        "metrics.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const nlohmann::json man = read_json((dir / "manifest.json").string());
  EXPECT_EQ(man["config_hash"], sc.config_hash());
  EXPECT_EQ(man["sim_steps"], 600);
  const RunLog back = read_run_log(dir.string());
  const MetricsReport m2 = compute_metrics(back, sc.metrics);
  EXPECT_EQ(m2.slippage.value, m.slippage.value);
  EXPECT_EQ(m2.avg_rotation_speed, m.avg_rotation_speed);
  EXPECT_EQ(m2.avg_joint_speed, m.avg_joint_speed);
  EXPECT_EQ(m2.joint_tracking_rms, m.joint_tracking_rms);
  nlohmann::json a = to_json(m), b = to_json(m2);
  a.erase("wall_time");
  b.erase("wall_time");
  EXPECT_EQ(a, b);
}

TEST(RunLogFiles, EmptyDirectoryIsAnError) {
  const fs::path dir = fresh_dir("empty");
  fs::create_directories(dir);
  EXPECT_THROW(read_run_log(dir.string()), Error);
  EXPECT_TRUE(fs::is_empty(dir));
}

TEST(Experiments, KappaSweepShape) {
  const Scenario sc = load_scenario(test::scenario_path("planar_rotz.json"),
                                    {"experiments.kappa_sweep.kappas=[100,10000]", "experiments.kappa_sweep.steps=2"});
  const fs::path dir = fresh_dir("kappa");
  const KappaSweepResult r = run_kappa_sweep(sc, dir.string());
  EXPECT_EQ(r.rotation_speed.size(), 2u);
  const CsvTable t = read_csv((dir / "kappa_sweep.csv").string());
  EXPECT_EQ(t.rows.size(), 4u);
  EXPECT_NO_THROW(t.column("cost"));
  EXPECT_NO_THROW(t.column("u_norm"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
}

TEST(Experiments, UnknownNameIsConfigError) {
  const Scenario sc = load_scenario(test::scenario_path("planar_rotz.json"));
  EXPECT_THROW(run_experiment("nope", sc, ""), ConfigError);
}

TEST(Experiments, ZeroMagnitudeDisturbanceEqualsBaseline) {
  const Scenario sc = load_scenario(test::scenario_path("planar_free.json"),
                                    {"experiments.robustness.steps=4", "experiments.robustness.settle_steps=2"});
  const RobustnessRun a = robustness_run(sc, 0.0, 0);
  const RobustnessRun b = robustness_run(sc, 0.0, 7);
  MpcConfig cfg = sc.loop.mpc;
  cfg.command.absolute = true;
  const PlannerLog base = run_planner_loop(*sc.model, cfg, sc.q0, 6);
  const std::vector<double> err = object_tracking_error(base);
  ASSERT_EQ(a.error.size(), 5u);
  for (std::size_t k = 0; k < a.error.size(); ++k) {
    EXPECT_EQ(a.error[k], err[k + 2]);
    EXPECT_EQ(b.error[k], err[k + 2]);
  }
}

}  // namespace
}  // namespace cimpc
