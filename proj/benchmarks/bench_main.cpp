#include <benchmark/benchmark.h>

#include <cimpc/cimpc.hpp>

namespace {

using namespace cimpc;

const Scenario& rotz() {
  static const Scenario sc = load_scenario(std::string(CIMPC_BENCH_SCENARIO_DIR) + "/planar_rotz.json");
  return sc;
}

void BM_CqdcStep(benchmark::State& state) {
  const Scenario& sc = rotz();
  CqdcParams p = sc.loop.mpc.dynamics;
  p.kappa = sc.loop.mpc.ocp.kappa;
  p.compute_gradients = state.range(0) != 0;
  const VectorXd u = VectorXd::Constant(sc.model->n_r(), 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(step_dynamics(*sc.model, sc.q0, u, p));
}
BENCHMARK(BM_CqdcStep)->Arg(0)->Arg(1);

void BM_MpcStep(benchmark::State& state) {
  const Scenario& sc = rotz();
  for (auto _ : state) benchmark::DoNotOptimize(mpc_step(*sc.model, sc.q0, 0.0, sc.loop.mpc, nullptr));
}
BENCHMARK(BM_MpcStep)->Unit(benchmark::kMillisecond);

void BM_TrackingSolve(benchmark::State& state) {
  const Scenario& sc = rotz();
  const ControllerConfig& cc = sc.loop.controller;
  const StiffnessSet ss = build_stiffness_set(detect_contacts(*sc.model, sc.q0, 0.05), sc.model->n_r(), cc.contact);
  const LinearPlant plant = assemble_plant(ss, sc.model->n_r(), cc.k_p, cc.k_d, cc.object_mode, cc.dt);
  const int nr = sc.model->n_r(), nf = 3 * ss.size();
  TrackingReference ref;
  ref.xi_ref.assign(static_cast<std::size_t>(cc.N + 1), sc.q0.head(nr));
  ref.F_ref.assign(static_cast<std::size_t>(cc.N + 1), VectorXd::Constant(nf, 0.1));
  ref.u_ref.assign(static_cast<std::size_t>(cc.N), VectorXd::Zero(nr));
  ref.F_weight = VectorXd::Ones(nf);
  const TrackingState x{sc.q0.head(nr), sc.q0.head(nr), VectorXd::Zero(nf)};
  for (auto _ : state) benchmark::DoNotOptimize(tracking_solve(x, plant, ref, cc.weights));
  state.counters["contacts"] = ss.size();
}
BENCHMARK(BM_TrackingSolve);

void BM_SimStep(benchmark::State& state) {
  const Scenario& sc = rotz();
  Simulator sim(*sc.model, sc.loop.sim);
  const SimState s0 = sim.initial_state(sc.q0);
  const VectorXd tau = VectorXd::Zero(sc.model->n_r());
  for (auto _ : state) benchmark::DoNotOptimize(sim.step(s0, tau));
}
BENCHMARK(BM_SimStep);

}  // namespace

BENCHMARK_MAIN();
