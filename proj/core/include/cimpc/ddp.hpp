#pragma once

#include <functional>
#include <vector>

#include "cimpc/common.hpp"
#include "cimpc/contact.hpp"
#include "cimpc/cost.hpp"
#include "cimpc/cqdc.hpp"
#include "cimpc/model.hpp"

namespace cimpc {

/// Planned contact force at one knot, keyed by geometry pair.
struct KnotContact {
  PairId pair;
  double phi = 0.0;
  Vector3d normal = Vector3d::UnitZ();
  Vector3d lambda = Vector3d::Zero();       // constraint-form dual
  Vector3d force_world = Vector3d::Zero();  // exerted by a on b (robot on object), N
};

struct StepEval {
  VectorXd x_next;
  MatrixXd f_x;
  MatrixXd f_u;
  std::vector<KnotContact> contacts;
};

/// x_{k+1} = f(x_k, u_k). Gradients are required only when `gradients` is set.
using DynamicsFn = std::function<StepEval(const VectorXd& x, const VectorXd& u, bool gradients)>;

/// CQDC step wrapped as a DDP dynamics function.
DynamicsFn cqdc_dynamics(const SystemModel& model, const CqdcParams& params);

struct DdpOptions {
  int max_iters = 30;
  double cost_tol = 1e-6;
  double reg_init = 1e-8;
  double reg_factor = 10.0;
  double reg_min = 1e-10;
  double reg_max = 1e10;
};

struct OcpConfig {
  int N = 10;
  double h = 0.1;
  VectorXd u_lo;
  VectorXd u_hi;
  double kappa = 100.0;
  DdpOptions ddp;
  void validate(int n_r) const;
};

struct ReferenceTrajectory {
  std::vector<VectorXd> X;  // N + 1 states
  std::vector<VectorXd> U;  // N controls
  std::vector<std::vector<KnotContact>> Lambda;  // N knot force sets
  double t0 = 0.0;
  double h = 0.1;
  bool converged = false;
  int iterations = 0;
  std::vector<double> cost_trace;  // initial rollout, then each accepted iteration
  double solve_time = 0.0;         // seconds

  int horizon() const { return static_cast<int>(U.size()); }
  double cost() const { return cost_trace.empty() ? 0.0 : cost_trace.back(); }
};

/// Result of min 0.5 x'Hx + g'x over lo <= x <= hi.
struct BoxQpResult {
  VectorXd x;
  std::vector<bool> free;
  MatrixXd H_free_inv;  // inverse of H on the free set, free-by-free
  bool ok = false;
  int iters = 0;
};

/// Projected Newton with free/clamped set iteration.
BoxQpResult box_qp(const MatrixXd& H, const VectorXd& g, const VectorXd& lo, const VectorXd& hi,
                   const VectorXd& x0);

/// Control-limited Gauss-Newton DDP. U_init is clamped to the box.
ReferenceTrajectory ddp_solve(const VectorXd& x0, std::vector<VectorXd> U_init,
                              const OcpConfig& ocp, const CostConfig& cost,
                              const DynamicsFn& dynamics);

/// Total cost of a rollout from x0 under U.
double rollout_cost(const VectorXd& x0, const std::vector<VectorXd>& U, const CostConfig& cost,
                    const DynamicsFn& dynamics, std::vector<VectorXd>* X = nullptr);

}  // namespace cimpc
