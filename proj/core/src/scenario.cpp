#include "cimpc/scenario.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace cimpc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

VectorXd vec(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + " must contain numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

// Scalar -> s I, array -> diag, array of arrays -> full matrix.
MatrixXd weight(const json& j, int n, const std::string& what) {
  if (j.is_number()) return MatrixXd::Identity(n, n) * j.get<double>();
  if (j.is_array() && !j.empty() && j[0].is_array()) {
    if (static_cast<int>(j.size()) != n) throw ConfigError(what + " has wrong size");
    MatrixXd m(n, n);
    for (int r = 0; r < n; ++r) {
      const VectorXd row = vec(j[static_cast<std::size_t>(r)], what);
      if (row.size() != n) throw ConfigError(what + " has wrong size");
      m.row(r) = row.transpose();
    }
    return m;
  }
  const VectorXd d = vec(j, what);
  if (d.size() != n) throw ConfigError(what + " has wrong size");
  return d.asDiagonal();
}

VectorXd broadcast(const json& j, int n, const std::string& what) {
  if (j.is_number()) return VectorXd::Constant(n, j.get<double>());
  const VectorXd v = vec(j, what);
  if (v.size() != n) throw ConfigError(what + " has wrong size");
  return v;
}

template <typename T>
T get(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

CompliantParams compliant(const json& j, CompliantParams p) {
  p.sigma = get(j, "sigma", p.sigma);
  p.k = get(j, "k", p.k);
  p.v_d = get(j, "v_d", p.v_d);
  p.alpha = get(j, "alpha", p.alpha);
  p.use_dissipation = get(j, "use_dissipation", p.use_dissipation);
  p.validate();
  return p;
}

json sub(const json& j, const char* key) {
  if (j.is_object() && j.contains(key)) return j.at(key);
  return json::object();
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string Scenario::config_hash() const { return fnv1a_hex(raw.dump()); }

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

Scenario scenario_from_json(json j, const std::string& base_dir, const std::string& path) {
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  Scenario sc;
  sc.path = path;
  sc.name = get<std::string>(j, "name", "scenario");
  if (!j.contains("model")) throw ConfigError("scenario needs a 'model' entry");
  if (j["model"].is_string()) {
    fs::path mp = j["model"].get<std::string>();
    if (mp.is_relative()) mp = fs::path(base_dir) / mp;
    if (!fs::exists(mp)) throw ConfigError("model file not found: " + mp.string());
    sc.model_path = mp.string();
    sc.model = std::make_shared<SystemModel>(load_model(sc.model_path));
  } else {
    sc.model = std::make_shared<SystemModel>(model_spec_from_json(j["model"]));
  }
  const SystemModel& m = *sc.model;
  const int nr = m.n_r();
  const int no = m.n_o();

  sc.q0 = VectorXd::Zero(m.n_q());
  if (j.contains("q0")) {
    sc.q0 = vec(j["q0"], "q0");
    require_size(sc.q0.size(), m.n_q(), "scenario q0");
  }
  sc.seed = get<std::uint64_t>(j, "seed", 0);
  sc.duration = get(j, "duration", 10.0);
  if (!(sc.duration > 0.0)) throw ConfigError("duration must be positive");
  sc.controller = controller_kind_from_string(get<std::string>(j, "controller", "ours"));

  ClosedLoopConfig& L = sc.loop;
  const json rates = sub(j, "rates");
  L.rates.mpc_hz = get(rates, "mpc_hz", L.rates.mpc_hz);
  L.rates.control_hz = get(rates, "control_hz", L.rates.control_hz);
  L.rates.sim_hz = get(rates, "sim_hz", L.rates.sim_hz);
  L.rates.validate();

  // high level
  const json ocp = sub(j, "ocp");
  MpcConfig& mpc = L.mpc;
  mpc.ocp.N = get(ocp, "N", 10);
  mpc.ocp.h = get(ocp, "h", 0.1);
  mpc.ocp.kappa = get(ocp, "kappa", 100.0);
  const json umax = ocp.contains("u_max") ? ocp["u_max"] : json(0.05);
  mpc.ocp.u_hi = broadcast(umax, nr, "ocp.u_max");
  mpc.ocp.u_lo = -mpc.ocp.u_hi;
  const json ddp = sub(ocp, "ddp");
  mpc.ocp.ddp.max_iters = get(ddp, "max_iters", mpc.ocp.ddp.max_iters);
  mpc.ocp.ddp.cost_tol = get(ddp, "cost_tol", mpc.ocp.ddp.cost_tol);
  mpc.ocp.ddp.reg_init = get(ddp, "reg_init", mpc.ocp.ddp.reg_init);
  mpc.ocp.validate(nr);

  const json cq = sub(j, "cqdc");
  mpc.dynamics.phi_max = get(cq, "phi_max", mpc.dynamics.phi_max);
  mpc.dynamics.max_iters = get(cq, "max_iters", mpc.dynamics.max_iters);
  mpc.dynamics.decrement_tol = get(cq, "decrement_tol", mpc.dynamics.decrement_tol);

  const json cost = sub(j, "cost");
  mpc.W_o = weight(cost.contains("W_o") ? cost["W_o"] : json(200.0), no, "cost.W_o");
  mpc.W_r = weight(cost.contains("W_r") ? cost["W_r"] : json(0.5), nr, "cost.W_r");
  mpc.W_u = weight(cost.contains("W_u") ? cost["W_u"] : json(1e-2), nr, "cost.W_u");
  mpc.gamma_r = get(cost, "gamma_r", mpc.gamma_r);
  mpc.tail_knots = get(cost, "tail_knots", mpc.tail_knots);
  mpc.q_r_ref = cost.contains("q_r_ref") ? vec(cost["q_r_ref"], "cost.q_r_ref")
                                         : VectorXd(sc.q0.head(nr));
  require_size(mpc.q_r_ref.size(), nr, "cost.q_r_ref");

  const json cmd = sub(j, "command");
  mpc.command.rate = cmd.contains("rate") ? broadcast(cmd["rate"], no, "command.rate")
                                          : VectorXd::Zero(no);
  mpc.command.absolute = get(cmd, "absolute", false);
  mpc.command.origin = cmd.contains("origin") ? broadcast(cmd["origin"], no, "command.origin")
                                              : VectorXd(sc.q0.tail(no));
  mpc.command.t_origin = get(cmd, "t_origin", 0.0);

  // low level
  const json ctl = sub(j, "controller_params");
  ControllerConfig& cc = L.controller;
  cc.k_p = get(ctl, "k_p", cc.k_p);
  cc.k_d = get(ctl, "k_d", cc.k_d);
  cc.N = get(ctl, "N", cc.N);
  cc.weights.w_xi = get(ctl, "w_xi", cc.weights.w_xi);
  cc.weights.w_F = get(ctl, "w_F", cc.weights.w_F);
  cc.weights.w_u = get(ctl, "w_u", cc.weights.w_u);
  cc.weights.terminal_scale = get(ctl, "terminal_scale", cc.weights.terminal_scale);
  cc.phi_max = get(ctl, "phi_max", cc.phi_max);
  cc.measured_threshold = get(ctl, "measured_threshold", cc.measured_threshold);
  cc.planned_threshold = get(ctl, "planned_threshold", cc.planned_threshold);
  cc.unplanned_weight = get(ctl, "unplanned_weight", cc.unplanned_weight);
  cc.contact = compliant(sub(ctl, "contact"), cc.contact);
  const std::string mode =
      get<std::string>(ctl, "object_mode", no == 1 ? "anchored" : "free");
  if (mode == "anchored") {
    cc.object_mode = ObjectMode::Anchored;
  } else if (mode == "free") {
    cc.object_mode = ObjectMode::Free;
  } else {
    throw ConfigError("controller_params.object_mode must be 'anchored' or 'free'");
  }
  if (!(cc.k_p > 0.0) || !(cc.k_d > 0.0) || cc.N < 1) {
    throw ConfigError("controller_params need k_p, k_d > 0 and N >= 1");
  }
  cc.dt = 1.0 / L.rates.control_hz;
  L.pd.k_p = cc.k_p;
  L.pd.k_d = cc.k_d;
  L.pd.gravity_comp = get(ctl, "gravity_comp", true);
  L.k_ctrl = get(ctl, "k_ctrl", cc.k_p);

  const json simj = sub(j, "sim");
  L.sim.rotor_inertia = get(simj, "rotor_inertia", L.sim.rotor_inertia);
  L.sim.friction_v_reg = get(simj, "friction_v_reg", L.sim.friction_v_reg);
  L.sim.phi_max = get(simj, "phi_max", L.sim.phi_max);
  L.sim.contact = compliant(sub(simj, "contact"), L.sim.contact);
  L.sim.dt = 1.0 / L.rates.sim_hz;
  L.sim.validate();

  if (j.contains("disturbances")) {
    for (const json& d : j["disturbances"]) {
      Disturbance dist;
      dist.t = get(d, "t", 0.0);
      dist.impulse = broadcast(d.contains("impulse") ? d["impulse"] : json(0.0), no,
                               "disturbance impulse");
      L.disturbances.push_back(dist);
    }
  }

  const json met = sub(j, "metrics");
  sc.metrics.slip_c = get(met, "slip_c", sc.metrics.slip_c);
  sc.metrics.slip_gate = get(met, "slip_gate", sc.metrics.slip_gate);
  sc.metrics.contact_phi = get(met, "contact_phi", sc.metrics.contact_phi);
  sc.metrics.recover_threshold = get(met, "recover_threshold", sc.metrics.recover_threshold);
  if (!(sc.metrics.slip_c < 0.0) || !(sc.metrics.slip_gate > 0.0)) {
    throw ConfigError("metrics need slip_c < 0 and slip_gate > 0");
  }

  const json ex = sub(j, "experiments");
  const json ks = sub(ex, "kappa_sweep");
  sc.kappa_sweep.kappas = get(ks, "kappas", sc.kappa_sweep.kappas);
  sc.kappa_sweep.steps = get(ks, "steps", sc.kappa_sweep.steps);
  sc.gait.steps = get(sub(ex, "gait"), "steps", sc.gait.steps);
  const json cmp = sub(ex, "controller_compare");
  sc.compare.duration = get(cmp, "duration", sc.compare.duration);
  if (cmp.contains("methods")) {
    sc.compare.methods.clear();
    for (const auto& s : cmp["methods"]) {
      sc.compare.methods.push_back(controller_kind_from_string(s.get<std::string>()));
    }
  }
  const json rb = sub(ex, "robustness");
  RobustnessConfig& R = sc.robustness;
  R.magnitudes = get(rb, "magnitudes", R.magnitudes);
  R.seeds = get(rb, "seeds", R.seeds);
  R.steps = get(rb, "steps", R.steps);
  R.settle_steps = get(rb, "settle_steps", R.settle_steps);
  R.xy_ratio = get(rb, "xy_ratio", R.xy_ratio);
  R.threads = get(rb, "threads", R.threads);
  if (R.seeds < 1 || R.steps < 1 || R.settle_steps < 0) {
    throw ConfigError("robustness needs seeds, steps >= 1 and settle_steps >= 0");
  }

  sc.raw = std::move(j);
  return sc;
}

Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("scenario " + path + " is not valid JSON");
  for (const auto& o : overrides) apply_override(j, o);
  const std::string base = fs::path(path).parent_path().string();
  try {
    return scenario_from_json(std::move(j), base.empty() ? "." : base, path);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario ") + path + ": " + e.what());
  }
}

}  // namespace cimpc
