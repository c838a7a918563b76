#include "cimpc/experiments.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <thread>

#include "cimpc/io.hpp"

namespace cimpc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double yaw(const VectorXd& q) { return q[q.size() - 1]; }

double mean_speed(const PlannerLog& log) {
  if (log.q.size() < 2) return 0.0;
  return (yaw(log.q.back()) - yaw(log.q.front())) / (log.t.back() - log.t.front());
}

}  // namespace

KappaSweepResult run_kappa_sweep(const Scenario& sc, const std::string& out_dir) {
  KappaSweepResult res;
  const SystemModel& model = *sc.model;
  for (double kappa : sc.kappa_sweep.kappas) {
    MpcConfig cfg = sc.loop.mpc;
    cfg.ocp.kappa = kappa;
    PlannerLog log = run_planner_loop(model, cfg, sc.q0, sc.kappa_sweep.steps);
    res.kappas.push_back(kappa);
    res.rotation_speed.push_back(mean_speed(log));
    res.logs.push_back(std::move(log));
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    CsvWriter w(out_dir + "/kappa_sweep.csv",
                {"kappa", "step", "t", "cost", "yaw", "u_norm", "iterations", "converged"});
    for (std::size_t i = 0; i < res.kappas.size(); ++i) {
      const PlannerLog& log = res.logs[i];
      for (std::size_t s = 0; s < log.u.size(); ++s) {
        w.row(std::vector<double>{res.kappas[i], static_cast<double>(s), log.t[s],
                                  log.mpc[s].cost, yaw(log.q[s]), log.u[s].norm(),
                                  static_cast<double>(log.mpc[s].iterations),
                                  log.mpc[s].converged ? 1.0 : 0.0});
      }
    }
    CsvWriter summary(out_dir + "/kappa_summary.csv",
                      {"kappa", "avg_rotation_speed", "steps", "aborted"});
    for (std::size_t i = 0; i < res.kappas.size(); ++i) {
      summary.row(std::vector<double>{res.kappas[i], res.rotation_speed[i],
                                      static_cast<double>(res.logs[i].u.size()),
                                      res.logs[i].aborted ? 1.0 : 0.0});
    }
    json m = manifest(sc, "kappa_sweep");
    m["files"] = {"kappa_sweep.csv", "kappa_summary.csv"};
    write_json(out_dir + "/manifest.json", m);
  }
  return res;
}

GaitResult run_gait(const Scenario& sc, const std::string& out_dir) {
  GaitResult res;
  res.log = run_planner_loop(*sc.model, sc.loop.mpc, sc.q0, sc.gait.steps);
  res.metrics = compute_metrics(res.log, sc.metrics);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_planner_log(out_dir + "/gait_trajectory.csv", res.log);
    CsvWriter w(out_dir + "/gait_contacts.csv", {"pair_a", "pair_b", "t_start", "t_end"});
    for (const auto& iv : res.metrics.timeline.intervals) {
      w.row(std::vector<double>{static_cast<double>(iv.pair.a), static_cast<double>(iv.pair.b),
                                iv.t_start, iv.t_end});
    }
    write_json(out_dir + "/metrics.json", to_json(res.metrics));
    json m = manifest(sc, "gait");
    m["aborted"] = res.log.aborted;
    m["abort_reason"] = res.log.abort_reason;
    m["files"] = {"gait_trajectory.csv", "gait_contacts.csv", "metrics.json"};
    write_json(out_dir + "/manifest.json", m);
  }
  return res;
}

std::vector<CompareRow> run_controller_compare(const Scenario& sc, const std::string& out_dir) {
  std::vector<CompareRow> rows;
  for (ControllerKind kind : sc.compare.methods) {
    CompareRow row;
    row.kind = kind;
    row.log = run_closed_loop(*sc.model, sc.loop, kind, sc.q0, sc.compare.duration);
    row.metrics = compute_metrics(row.log, sc.metrics);
    if (!out_dir.empty()) write_run_log(out_dir + "/" + to_string(kind), row.log, sc, row.metrics);
    rows.push_back(std::move(row));
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    CsvWriter w(out_dir + "/table_I.csv",
                {"method", "avg_slippage", "avg_rotation_speed", "avg_joint_speed"});
    for (const auto& r : rows) {
      w.row(std::vector<std::string>{to_string(r.kind), format_double(r.metrics.slippage.value),
                                     format_double(r.metrics.avg_rotation_speed),
                                     format_double(r.metrics.avg_joint_speed)});
    }
    json m = manifest(sc, "controller_compare");
    m["files"] = {"table_I.csv"};
    json runs = json::array();
    for (const auto& r : rows) {
      runs.push_back({{"method", to_string(r.kind)},
                      {"aborted", r.log.aborted},
                      {"abort_reason", r.log.abort_reason},
                      {"wall_time", r.log.wall_time}});
    }
    m["runs"] = runs;
    write_json(out_dir + "/manifest.json", m);
  }
  return rows;
}

RobustnessRun robustness_run(const Scenario& sc, double magnitude, int seed_index) {
  const RobustnessConfig& R = sc.robustness;
  const SystemModel& model = *sc.model;
  const int no = model.n_o();
  RobustnessRun run;
  run.magnitude = magnitude;
  run.seed = seed_index;

  std::mt19937_64 rng(sc.seed * 1000003ULL + static_cast<std::uint64_t>(seed_index));
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const double sign = (rng() & 1ULL) ? 1.0 : -1.0;
  const double dir = angle(rng);
  VectorXd delta = VectorXd::Zero(no);
  delta[no - 1] = sign * magnitude;
  if (no == 3) {
    delta[0] = R.xy_ratio * magnitude * std::cos(dir);
    delta[1] = R.xy_ratio * magnitude * std::sin(dir);
  }

  MpcConfig cfg = sc.loop.mpc;
  cfg.command.absolute = true;
  const StateHook hook = [&](int step, VectorXd& q) {
    if (step == R.settle_steps) q.tail(no) += delta;
  };
  const PlannerLog log = run_planner_loop(model, cfg, sc.q0, R.settle_steps + R.steps, hook);
  const std::vector<double> err = object_tracking_error(log);
  for (std::size_t k = static_cast<std::size_t>(R.settle_steps); k < err.size(); ++k) {
    run.error.push_back(err[k]);
  }
  run.failed = log.aborted || run.error.size() != static_cast<std::size_t>(R.steps + 1);
  run.reason = log.abort_reason;
  double s = 0.0;
  for (double e : run.error) s += e;
  run.mean_error = run.error.empty() ? 0.0 : s / static_cast<double>(run.error.size());
  run.recovered =
      !run.failed && !run.error.empty() && run.error.back() < sc.metrics.recover_threshold;
  return run;
}

RobustnessResult run_robustness(const Scenario& sc, const std::string& out_dir) {
  const RobustnessConfig& R = sc.robustness;
  RobustnessResult res;
  res.magnitudes = R.magnitudes;
  const std::size_t nm = R.magnitudes.size();
  const std::size_t total = nm * static_cast<std::size_t>(R.seeds);
  res.runs.resize(total);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < total; i = next++) {
      const std::size_t m = i / static_cast<std::size_t>(R.seeds);
      const int seed = static_cast<int>(i % static_cast<std::size_t>(R.seeds));
      try {
        res.runs[i] = robustness_run(sc, R.magnitudes[m], seed);
      } catch (const Error& e) {
        res.runs[i].magnitude = R.magnitudes[m];
        res.runs[i].seed = seed;
        res.runs[i].failed = true;
        res.runs[i].reason = e.what();
      }
    }
  };
  unsigned threads = R.threads > 0 ? static_cast<unsigned>(R.threads)
                                   : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(total, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const std::size_t len = static_cast<std::size_t>(R.steps + 1);
  for (std::size_t m = 0; m < nm; ++m) {
    std::vector<double> sum(len, 0.0), sq(len, 0.0);
    std::vector<int> count(len, 0);
    double total_err = 0.0;
    int recovered = 0;
    int used = 0;
    for (int s = 0; s < R.seeds; ++s) {
      const RobustnessRun& r = res.runs[m * static_cast<std::size_t>(R.seeds) + static_cast<std::size_t>(s)];
      if (r.recovered) ++recovered;
      if (r.failed) continue;
      ++used;
      total_err += r.mean_error;
      for (std::size_t k = 0; k < len && k < r.error.size(); ++k) {
        sum[k] += r.error[k];
        sq[k] += r.error[k] * r.error[k];
        ++count[k];
      }
    }
    res.mean_error.push_back(used ? total_err / used : std::numeric_limits<double>::infinity());
    res.recovered_fraction.push_back(static_cast<double>(recovered) / R.seeds);
    std::vector<double> mean(len, 0.0), sd(len, 0.0);
    for (std::size_t k = 0; k < len; ++k) {
      if (count[k] == 0) continue;
      mean[k] = sum[k] / count[k];
      sd[k] = std::sqrt(std::max(0.0, sq[k] / count[k] - mean[k] * mean[k]));
    }
    res.curve_mean.push_back(std::move(mean));
    res.curve_std.push_back(std::move(sd));
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    const double h = sc.loop.mpc.ocp.h;
    CsvWriter curves(out_dir + "/robustness.csv", {"magnitude", "step", "t", "mean_error", "std_error"});
    for (std::size_t m = 0; m < nm; ++m) {
      for (std::size_t k = 0; k < len; ++k) {
        curves.row(std::vector<double>{res.magnitudes[m], static_cast<double>(k), k * h,
                                       res.curve_mean[m][k], res.curve_std[m][k]});
      }
    }
    CsvWriter summary(out_dir + "/robustness_summary.csv",
                      {"magnitude", "mean_error", "recovered_fraction", "failed_runs"});
    for (std::size_t m = 0; m < nm; ++m) {
      int failed = 0;
      for (int s = 0; s < R.seeds; ++s) {
        failed += res.runs[m * static_cast<std::size_t>(R.seeds) + static_cast<std::size_t>(s)].failed;
      }
      summary.row(std::vector<double>{res.magnitudes[m], res.mean_error[m],
                                      res.recovered_fraction[m], static_cast<double>(failed)});
    }
    CsvWriter runs(out_dir + "/robustness_runs.csv",
                   {"magnitude", "seed", "mean_error", "final_error", "recovered", "failed", "reason"});
    for (const auto& r : res.runs) {
      runs.row(std::vector<std::string>{
          format_double(r.magnitude), std::to_string(r.seed), format_double(r.mean_error),
          format_double(r.error.empty() ? std::numeric_limits<double>::quiet_NaN() : r.error.back()),
          r.recovered ? "1" : "0", r.failed ? "1" : "0", r.reason});
    }
    json m = manifest(sc, "robustness");
    m["files"] = {"robustness.csv", "robustness_summary.csv", "robustness_runs.csv"};
    write_json(out_dir + "/manifest.json", m);
  }
  return res;
}

json run_experiment(const std::string& name, const Scenario& sc, const std::string& out_dir) {
  json s;
  s["experiment"] = name;
  s["config_hash"] = sc.config_hash();
  if (name == "kappa_sweep") {
    const auto r = run_kappa_sweep(sc, out_dir);
    s["kappas"] = r.kappas;
    s["avg_rotation_speed"] = r.rotation_speed;
  } else if (name == "gait") {
    const auto r = run_gait(sc, out_dir);
    s["metrics"] = to_json(r.metrics);
    s["aborted"] = r.log.aborted;
  } else if (name == "controller_compare") {
    const auto rows = run_controller_compare(sc, out_dir);
    for (const auto& r : rows) {
      s["methods"].push_back({{"method", to_string(r.kind)},
                              {"avg_slippage", r.metrics.slippage.value},
                              {"avg_rotation_speed", r.metrics.avg_rotation_speed},
                              {"avg_joint_speed", r.metrics.avg_joint_speed},
                              {"aborted", r.log.aborted}});
    }
  } else if (name == "robustness") {
    const auto r = run_robustness(sc, out_dir);
    s["magnitudes"] = r.magnitudes;
    s["mean_error"] = r.mean_error;
    s["recovered_fraction"] = r.recovered_fraction;
  } else {
    throw ConfigError("unknown experiment '" + name +
                      "' (kappa_sweep, gait, controller_compare, robustness)");
  }
  return s;
}

}  // namespace cimpc
