#include "cimpc/ddp.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace cimpc {

DynamicsFn cqdc_dynamics(const SystemModel& model, const CqdcParams& params) {
  return [&model, params](const VectorXd& x, const VectorXd& u, bool gradients) {
    CqdcParams p = params;
    p.compute_gradients = gradients;
    const SmoothStepResult r = step_dynamics(model, x, u, p);
    StepEval e;
    e.x_next = r.q_next;
    e.f_x = r.f_x;
    e.f_u = r.f_u;
    e.contacts.reserve(r.contacts.size());
    for (std::size_t i = 0; i < r.contacts.size(); ++i) {
      const ContactInfo& c = r.contacts[i];
      KnotContact k;
      k.pair = c.pair;
      k.phi = c.phi;
      k.normal = c.normal;
      k.lambda = r.lambda[i];
      k.force_world = -(c.R_C * r.force[i]);
      e.contacts.push_back(k);
    }
    return e;
  };
}

void OcpConfig::validate(int n_r) const {
  if (N < 2) throw ConfigError("OCP horizon N must be >= 2");
  if (!(h > 0.0)) throw ConfigError("OCP step h must be positive");
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  require_size(u_lo.size(), n_r, "u_lo");
  require_size(u_hi.size(), n_r, "u_hi");
  if (!(u_lo.array() < u_hi.array()).all()) throw ConfigError("u_lo must be < u_hi");
}

BoxQpResult box_qp(const MatrixXd& H, const VectorXd& g, const VectorXd& lo, const VectorXd& hi,
                   const VectorXd& x0) {
  const auto n = g.size();
  BoxQpResult r;
  r.x = x0.cwiseMax(lo).cwiseMin(hi);
  r.free.assign(static_cast<std::size_t>(n), true);
  auto value = [&](const VectorXd& x) { return 0.5 * x.dot(H * x) + g.dot(x); };
  double f = value(r.x);
  Eigen::LLT<MatrixXd> llt;
  std::vector<int> idx;

  for (int it = 0; it < 100; ++it) {
    r.iters = it + 1;
    const VectorXd grad = g + H * r.x;
    idx.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = r.x[i] <= lo[i] && grad[i] > 0.0;
      const bool at_hi = r.x[i] >= hi[i] && grad[i] < 0.0;
      r.free[static_cast<std::size_t>(i)] = !(at_lo || at_hi);
      if (r.free[static_cast<std::size_t>(i)]) idx.push_back(static_cast<int>(i));
    }
    if (idx.empty()) break;
    const auto nf = static_cast<Eigen::Index>(idx.size());
    MatrixXd Hff(nf, nf);
    VectorXd gf(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      gf[a] = grad[idx[a]];
      for (Eigen::Index b = 0; b < nf; ++b) Hff(a, b) = H(idx[a], idx[b]);
    }
    llt.compute(Hff);
    if (llt.info() != Eigen::Success) return r;
    if (gf.lpNorm<Eigen::Infinity>() < 1e-12 * (1.0 + g.lpNorm<Eigen::Infinity>())) break;
    const VectorXd step_f = -llt.solve(gf);
    VectorXd dx = VectorXd::Zero(n);
    for (Eigen::Index a = 0; a < nf; ++a) dx[idx[a]] = step_f[a];

    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      const VectorXd xn = (r.x + t * dx).cwiseMax(lo).cwiseMin(hi);
      const double fn = value(xn);
      if (fn - f <= 0.1 * grad.dot(xn - r.x)) {
        const double improvement = f - fn;
        r.x = xn;
        f = fn;
        accepted = true;
        if (improvement < 1e-14 * (1.0 + std::abs(f))) it = 100;
        break;
      }
    }
    if (!accepted) break;
  }

  // Final free set and its inverse Hessian for the feedback gains.
  const VectorXd grad = g + H * r.x;
  idx.clear();
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool at_lo = r.x[i] <= lo[i] && grad[i] > 0.0;
    const bool at_hi = r.x[i] >= hi[i] && grad[i] < 0.0;
    r.free[static_cast<std::size_t>(i)] = !(at_lo || at_hi);
    if (r.free[static_cast<std::size_t>(i)]) idx.push_back(static_cast<int>(i));
  }
  const auto nf = static_cast<Eigen::Index>(idx.size());
  MatrixXd Hff(nf, nf);
  for (Eigen::Index a = 0; a < nf; ++a) {
    for (Eigen::Index b = 0; b < nf; ++b) Hff(a, b) = H(idx[a], idx[b]);
  }
  if (nf > 0) {
    llt.compute(Hff);
    if (llt.info() != Eigen::Success) return r;
    r.H_free_inv = llt.solve(MatrixXd::Identity(nf, nf));
  }
  r.ok = true;
  return r;
}

namespace {

struct Rollout {
  std::vector<VectorXd> X;
  std::vector<StepEval> evals;
  double cost = 0.0;
};

Rollout rollout(const VectorXd& x0, const std::vector<VectorXd>& U, const CostConfig& cost,
                const DynamicsFn& dyn, bool gradients) {
  Rollout r;
  const int N = static_cast<int>(U.size());
  r.X.reserve(static_cast<std::size_t>(N + 1));
  r.evals.reserve(static_cast<std::size_t>(N));
  r.X.push_back(x0);
  for (int k = 0; k < N; ++k) {
    r.cost += running_cost(r.X[k], U[k], cost, k).value;
    r.evals.push_back(dyn(r.X[k], U[k], gradients));
    r.X.push_back(r.evals.back().x_next);
  }
  r.cost += terminal_cost(r.X[N], cost).value;
  return r;
}

}  // namespace

double rollout_cost(const VectorXd& x0, const std::vector<VectorXd>& U, const CostConfig& cost,
                    const DynamicsFn& dynamics, std::vector<VectorXd>* X) {
  Rollout r = rollout(x0, U, cost, dynamics, false);
  if (X) *X = std::move(r.X);
  return r.cost;
}

ReferenceTrajectory ddp_solve(const VectorXd& x0, std::vector<VectorXd> U_init,
                              const OcpConfig& ocp, const CostConfig& cost,
                              const DynamicsFn& dynamics) {
  const auto t_start = std::chrono::steady_clock::now();
  const int N = ocp.N;
  const auto nu = ocp.u_lo.size();
  const auto nx = x0.size();
  if (static_cast<int>(U_init.size()) != N) throw DimensionError("ddp_solve: U_init size != N");
  if (cost.horizon() != N) throw DimensionError("ddp_solve: cost horizon != N");
  for (auto& u : U_init) {
    require_size(u.size(), nu, "ddp_solve u");
    u = u.cwiseMax(ocp.u_lo).cwiseMin(ocp.u_hi);
  }

  ReferenceTrajectory out;
  out.h = ocp.h;
  std::vector<VectorXd> U = std::move(U_init);
  Rollout cur = rollout(x0, U, cost, dynamics, true);
  out.cost_trace.push_back(cur.cost);

  std::vector<VectorXd> kff(static_cast<std::size_t>(N), VectorXd::Zero(nu));
  std::vector<MatrixXd> Kfb(static_cast<std::size_t>(N), MatrixXd::Zero(nu, nx));
  double reg = ocp.ddp.reg_init;
  bool converged = false;
  int it = 0;

  for (; it < ocp.ddp.max_iters && !converged; ++it) {
    // Backward pass, retried with more regularization on failure.
    bool backward_ok = false;
    double dV1 = 0.0;
    double dV2 = 0.0;
    while (!backward_ok) {
      const CostTerms term = terminal_cost(cur.X[N], cost);
      VectorXd Vx = term.l_x;
      MatrixXd Vxx = term.l_xx;
      dV1 = dV2 = 0.0;
      backward_ok = true;
      for (int k = N - 1; k >= 0; --k) {
        const CostTerms l = running_cost(cur.X[k], U[k], cost, k);
        const StepEval& e = cur.evals[k];
        const VectorXd Qx = l.l_x + e.f_x.transpose() * Vx;
        const VectorXd Qu = l.l_u + e.f_u.transpose() * Vx;
        const MatrixXd Qxx = l.l_xx + e.f_x.transpose() * Vxx * e.f_x;
        MatrixXd Quu = l.l_uu + e.f_u.transpose() * Vxx * e.f_u;
        const MatrixXd Qux = l.l_ux + e.f_u.transpose() * Vxx * e.f_x;
        Quu = 0.5 * (Quu + Quu.transpose());
        const MatrixXd Quu_reg = Quu + reg * MatrixXd::Identity(nu, nu);
        const BoxQpResult qp =
            box_qp(Quu_reg, Qu, ocp.u_lo - U[k], ocp.u_hi - U[k], kff[k]);
        if (!qp.ok) {
          backward_ok = false;
          break;
        }
        kff[k] = qp.x;
        MatrixXd K = MatrixXd::Zero(nu, nx);
        std::vector<int> idx;
        for (Eigen::Index i = 0; i < nu; ++i) {
          if (qp.free[static_cast<std::size_t>(i)]) idx.push_back(static_cast<int>(i));
        }
        if (!idx.empty()) {
          MatrixXd Qux_f(static_cast<Eigen::Index>(idx.size()), nx);
          for (std::size_t a = 0; a < idx.size(); ++a) {
            Qux_f.row(static_cast<Eigen::Index>(a)) = Qux.row(idx[a]);
          }
          const MatrixXd Kf = -qp.H_free_inv * Qux_f;
          for (std::size_t a = 0; a < idx.size(); ++a) {
            K.row(idx[a]) = Kf.row(static_cast<Eigen::Index>(a));
          }
        }
        Kfb[k] = K;
        const VectorXd& kk = kff[k];
        dV1 += kk.dot(Qu);
        dV2 += 0.5 * kk.dot(Quu * kk);
        Vx = Qx + K.transpose() * Quu * kk + K.transpose() * Qu + Qux.transpose() * kk;
        Vxx = Qxx + K.transpose() * Quu * K + K.transpose() * Qux + Qux.transpose() * K;
        Vxx = 0.5 * (Vxx + Vxx.transpose());
      }
      if (!backward_ok) {
        reg = std::max(reg * ocp.ddp.reg_factor, ocp.ddp.reg_min);
        if (reg > ocp.ddp.reg_max) break;
      }
    }
    if (!backward_ok) break;

    // Forward pass with backtracking; only strict decreases are accepted.
    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls <= 10; ++ls, alpha *= 0.5) {
      std::vector<VectorXd> Un(static_cast<std::size_t>(N));
      Rollout cand;
      try {
        cand.X.push_back(x0);
        for (int k = 0; k < N; ++k) {
          Un[k] = (U[k] + alpha * kff[k] + Kfb[k] * (cand.X[k] - cur.X[k]))
                      .cwiseMax(ocp.u_lo)
                      .cwiseMin(ocp.u_hi);
          cand.cost += running_cost(cand.X[k], Un[k], cost, k).value;
          cand.evals.push_back(dynamics(cand.X[k], Un[k], true));
          cand.X.push_back(cand.evals.back().x_next);
        }
        cand.cost += terminal_cost(cand.X[N], cost).value;
      } catch (const SolverError&) {
        break;  // abort this iteration, regularize and retry
      }
      if (std::isfinite(cand.cost) && cand.cost < cur.cost) {
        const double rel = (cur.cost - cand.cost) / std::max(std::abs(cur.cost), 1e-300);
        U = std::move(Un);
        cur = std::move(cand);
        out.cost_trace.push_back(cur.cost);
        accepted = true;
        if (rel < ocp.ddp.cost_tol) converged = true;
        break;
      }
    }
    if (accepted && alpha >= 0.25) {
      reg /= ocp.ddp.reg_factor;
      if (reg < ocp.ddp.reg_min) reg = 0.0;
    } else if (accepted) {
      // Heavy backtracking: the local model overshoots, so trust it less.
      reg = std::max(reg * ocp.ddp.reg_factor, ocp.ddp.reg_min);
    } else {
      // No decrease possible: converged if the model predicts none either.
      const double expected = -(dV1 + dV2);
      if (expected <= ocp.ddp.cost_tol * std::max(std::abs(cur.cost), 1e-300)) {
        converged = true;
      } else {
        reg = std::max(reg * ocp.ddp.reg_factor, ocp.ddp.reg_min);
        if (reg > ocp.ddp.reg_max) break;
      }
    }
  }

  out.X = std::move(cur.X);
  out.U = std::move(U);
  out.Lambda.reserve(static_cast<std::size_t>(N));
  for (auto& e : cur.evals) out.Lambda.push_back(std::move(e.contacts));
  out.converged = converged;
  out.iterations = it;
  out.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

}  // namespace cimpc
