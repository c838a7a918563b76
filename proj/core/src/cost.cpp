#include "cimpc/cost.hpp"

namespace cimpc {

namespace {

bool is_psd(const MatrixXd& W) {
  if (W.rows() != W.cols()) return false;
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + W.cwiseAbs().maxCoeff())) {
    return false;
  }
  if (W.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(W, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -1e-12 * (1.0 + W.cwiseAbs().maxCoeff());
}

CostTerms state_terms(const VectorXd& x, const CostConfig& cfg, int knot) {
  const auto nr = cfg.W_r.rows();
  const auto no = cfg.W_o.rows();
  require_size(x.size(), nr + no, "cost x");
  const MatrixXd wr = cfg.W_r_at(knot);
  const VectorXd er = x.head(nr) - cfg.q_r_ref_at(knot);
  const VectorXd eo = x.tail(no) - cfg.q_o_ref.at(knot);
  CostTerms c;
  c.value = er.dot(wr * er) + eo.dot(cfg.W_o * eo);
  c.l_x.resize(nr + no);
  c.l_x.head(nr) = 2.0 * wr * er;
  c.l_x.tail(no) = 2.0 * cfg.W_o * eo;
  c.l_xx = MatrixXd::Zero(nr + no, nr + no);
  c.l_xx.topLeftCorner(nr, nr) = 2.0 * wr;
  c.l_xx.bottomRightCorner(no, no) = 2.0 * cfg.W_o;
  return c;
}

}  // namespace

void CostConfig::validate(int n_r, int n_o) const {
  if (W_o.rows() != n_o || W_r.rows() != n_r || W_u.rows() != n_r) {
    throw DimensionError("cost weights do not match the model dimensions");
  }
  if (!is_psd(W_o) || !is_psd(W_r) || !is_psd(W_u)) {
    throw ConfigError("cost weights must be symmetric positive semidefinite");
  }
  if (gamma_r < 1.0) throw ConfigError("terminal boost gamma_r must be >= 1");
  if (tail_knots < 0) throw ConfigError("terminal boost tail_knots must be >= 0");
  if (q_o_ref.size() < 3) throw ConfigError("object reference needs N + 1 >= 3 knots");
  for (const auto& r : q_o_ref) require_size(r.size(), n_o, "q_o_ref");
  if (q_r_ref.size() != 1 && q_r_ref.size() != q_o_ref.size()) {
    throw ConfigError("q_r_ref must have one entry or one per knot");
  }
  for (const auto& r : q_r_ref) require_size(r.size(), n_r, "q_r_ref");
}

MatrixXd CostConfig::W_r_at(int knot) const {
  const int N = horizon();
  return knot >= N + 1 - tail_knots ? MatrixXd(gamma_r * W_r) : W_r;
}

const VectorXd& CostConfig::q_r_ref_at(int knot) const {
  return q_r_ref.size() == 1 ? q_r_ref.front() : q_r_ref.at(knot);
}

CostTerms running_cost(const VectorXd& x, const VectorXd& u, const CostConfig& cfg, int knot) {
  if (knot < 0 || knot >= cfg.horizon()) throw DimensionError("running_cost: knot out of range");
  require_size(u.size(), cfg.W_u.rows(), "cost u");
  CostTerms c = state_terms(x, cfg, knot);
  c.value += u.dot(cfg.W_u * u);
  c.l_u = 2.0 * cfg.W_u * u;
  c.l_uu = 2.0 * cfg.W_u;
  c.l_ux = MatrixXd::Zero(u.size(), x.size());
  return c;
}

CostTerms terminal_cost(const VectorXd& x, const CostConfig& cfg) {
  return state_terms(x, cfg, cfg.horizon());
}

}  // namespace cimpc
