// Command-line front end: run, experiment, metrics, dump-model.
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "cimpc/experiments.hpp"
#include "cimpc/io.hpp"

namespace fs = std::filesystem;
using namespace cimpc;

namespace {

constexpr int kOk = 0;
constexpr int kRunFailure = 1;
constexpr int kConfigError = 2;

std::string scenario_dir() {
  const char* env = std::getenv("CIMPC_SCENARIO_DIR");
  return env && *env ? std::string(env) : std::string(CIMPC_DEFAULT_SCENARIO_DIR);
}

std::string default_scenario(const std::string& experiment) {
  const std::string file = experiment == "robustness" ? "planar_free.json" : "planar_rotz.json";
  return (fs::path(scenario_dir()) / file).string();
}

std::string run_dir(const std::string& out, const std::string& group, const Scenario& sc,
                    const std::string& tag) {
  if (!out.empty()) return out;
  return (fs::path(output_root()) / group / (sc.name + "_" + tag + "_" + sc.config_hash().substr(0, 8)))
      .string();
}

int cmd_run(const std::string& path, const std::vector<std::string>& overrides,
            const std::string& controller, const std::string& out) {
  Scenario sc = load_scenario(path, overrides);
  const ControllerKind kind =
      controller.empty() ? sc.controller : controller_kind_from_string(controller);
  const RunLog log = run_closed_loop(*sc.model, sc.loop, kind, sc.q0, sc.duration);
  const MetricsReport m = compute_metrics(log, sc.metrics);
  const std::string dir = run_dir(out, "run", sc, to_string(kind));
  write_run_log(dir, log, sc, m);
  nlohmann::json s = to_json(m);
  s["run_dir"] = dir;
  std::cout << s.dump(2) << "\n";
  if (log.aborted) {
    std::cerr << "run aborted: " << log.abort_reason << "\n";
    return kRunFailure;
  }
  return kOk;
}

int cmd_experiment(const std::string& name, const std::vector<std::string>& overrides,
                   const std::string& scenario, const std::string& out) {
  const Scenario sc = load_scenario(scenario.empty() ? default_scenario(name) : scenario, overrides);
  const std::string dir = run_dir(out, "experiment", sc, name);
  nlohmann::json s = run_experiment(name, sc, dir);
  s["out_dir"] = dir;
  std::cout << s.dump(2) << "\n";
  bool failed = s.value("aborted", false);
  if (s.contains("methods")) {
    for (const auto& m : s["methods"]) failed = failed || m.value("aborted", false);
  }
  return failed ? kRunFailure : kOk;
}

int cmd_metrics(const std::string& dir) {
  const RunLog log = read_run_log(dir);
  MetricsConfig cfg;
  const nlohmann::json man = read_json(dir + "/manifest.json");
  if (man.contains("scenario") && man["scenario"].contains("metrics")) {
    const auto& j = man["scenario"]["metrics"];
    cfg.slip_c = j.value("slip_c", cfg.slip_c);
    cfg.slip_gate = j.value("slip_gate", cfg.slip_gate);
    cfg.contact_phi = j.value("contact_phi", cfg.contact_phi);
  }
  std::cout << to_json(compute_metrics(log, cfg)).dump(2) << "\n";
  return kOk;
}

int cmd_dump_model(const std::string& path) {
  const Scenario sc = load_scenario(path);
  const SystemModel& m = *sc.model;
  nlohmann::json j;
  j["model"] = m.to_json();
  j["n_r"] = m.n_r();
  j["n_o"] = m.n_o();
  j["q0"] = std::vector<double>(sc.q0.data(), sc.q0.data() + sc.q0.size());
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : candidate_pairs(m)) {
    pairs.push_back({{"a", m.geometries()[p.a].name}, {"b", m.geometries()[p.b].name},
                     {"mu", m.friction(p.a, p.b)}});
  }
  j["candidate_pairs"] = pairs;
  j["config_hash"] = sc.config_hash();
  std::cout << j.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contact-implicit MPC bench"};
  app.require_subcommand(1);

  std::string scenario_path, controller, out, exp_name, exp_scenario, metrics_dir, dump_path;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "closed-loop run of a scenario in the verification simulator");
  run->add_option("scenario", scenario_path, "scenario JSON")->required();
  run->add_option("--override", overrides, "key.path=value")->take_all();
  run->add_option("--controller", controller, "ours | open_loop | ff_torque | ff_pos");
  run->add_option("--out", out, "output directory");

  auto* exp = app.add_subcommand("experiment", "kappa_sweep | gait | controller_compare | robustness");
  exp->add_option("name", exp_name)->required();
  exp->add_option("--override", overrides, "key.path=value")->take_all();
  exp->add_option("--scenario", exp_scenario, "scenario JSON (defaults per experiment)");
  exp->add_option("--out", out, "output directory");

  auto* met = app.add_subcommand("metrics", "recompute metrics from a run directory");
  met->add_option("runlog_dir", metrics_dir)->required();

  auto* dump = app.add_subcommand("dump-model", "print the resolved model of a scenario");
  dump->add_option("scenario", dump_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(scenario_path, overrides, controller, out);
    if (*exp) return cmd_experiment(exp_name, overrides, exp_scenario, out);
    if (*met) return cmd_metrics(metrics_dir);
    if (*dump) return cmd_dump_model(dump_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailure;
  }
  return kOk;
}
