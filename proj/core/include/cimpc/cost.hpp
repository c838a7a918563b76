#pragma once

#include <vector>

#include "cimpc/common.hpp"

namespace cimpc {

/// Regulation costs on x = [q_r; q_o] and u. Norms are unhalved:
/// |q_o - q_o,ref|^2_{W_o} + |q_r - q_r,ref|^2_{W_r} + |u|^2_{W_u}.
struct CostConfig {
  MatrixXd W_o;
  MatrixXd W_r;
  MatrixXd W_u;
  std::vector<VectorXd> q_o_ref;  // one per knot, N + 1 entries
  std::vector<VectorXd> q_r_ref;  // one entry (constant) or N + 1 entries
  double gamma_r = 5.0;           // W_r multiplier over the horizon tail
  int tail_knots = 3;

  int horizon() const { return static_cast<int>(q_o_ref.size()) - 1; }
  void validate(int n_r, int n_o) const;
  /// W_r at a knot, including the terminal boost over the last tail_knots knots.
  MatrixXd W_r_at(int knot) const;
  const VectorXd& q_r_ref_at(int knot) const;
};

struct CostTerms {
  double value = 0.0;
  VectorXd l_x;
  VectorXd l_u;
  MatrixXd l_xx;
  MatrixXd l_uu;
  MatrixXd l_ux;
};

CostTerms running_cost(const VectorXd& x, const VectorXd& u, const CostConfig& cfg, int knot);
CostTerms terminal_cost(const VectorXd& x, const CostConfig& cfg);

}  // namespace cimpc
