#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cimpc/closed_loop.hpp"

namespace cimpc {

struct MetricsConfig {
  double slip_c = -2000.0;       // 1/m
  double slip_gate = 1e-3;       // m
  double contact_phi = 3e-3;     // m, contact timeline threshold
  double recover_threshold = 0.05;  // rad
};

struct KappaSweepConfig {
  std::vector<double> kappas{100.0, 500.0, 1000.0, 10000.0};
  int steps = 50;
};

struct GaitConfig {
  int steps = 200;
};

struct CompareConfig {
  double duration = 10.0;
  std::vector<ControllerKind> methods{ControllerKind::Ours, ControllerKind::OpenLoop,
                                      ControllerKind::FfTorque, ControllerKind::FfPos};
};

struct RobustnessConfig {
  std::vector<double> magnitudes{0.05, 0.1, 0.2, 0.3};  // rad of yaw displacement
  int seeds = 50;
  int steps = 100;          // MPC steps after the disturbance
  int settle_steps = 10;    // MPC steps before it
  double xy_ratio = 0.1;    // m of translation per rad of yaw
  int threads = 0;          // 0: hardware concurrency
};

/// Fully resolved scenario. `raw` is the JSON after overrides; the config hash
/// is computed from it.
struct Scenario {
  std::string name;
  std::string path;        // scenario file
  std::string model_path;  // resolved model file
  std::shared_ptr<const SystemModel> model;
  VectorXd q0;
  std::uint64_t seed = 0;
  double duration = 10.0;
  ControllerKind controller = ControllerKind::Ours;
  ClosedLoopConfig loop;
  MetricsConfig metrics;
  KappaSweepConfig kappa_sweep;
  GaitConfig gait;
  CompareConfig compare;
  RobustnessConfig robustness;
  nlohmann::json raw;

  std::string config_hash() const;
};

/// Apply "a.b.c=value" overrides. Values parse as JSON when possible and
/// fall back to strings. Unknown intermediate keys are created.
void apply_override(nlohmann::json& j, const std::string& assignment);

Scenario scenario_from_json(nlohmann::json j, const std::string& base_dir,
                            const std::string& path = "");
Scenario load_scenario(const std::string& path,
                       const std::vector<std::string>& overrides = {});

/// 64-bit FNV-1a of a byte string, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace cimpc
