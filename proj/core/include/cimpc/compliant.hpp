#pragma once

#include <vector>

#include "cimpc/common.hpp"
#include "cimpc/contact.hpp"

namespace cimpc {

struct CompliantParams {
  double sigma = 2e-4;  // m
  double k = 5000.0;    // N/m
  double v_d = 0.1;     // m/s
  double alpha = 0.3;   // tangential / normal stiffness ratio
  bool use_dissipation = false;
  void validate() const;
};

/// max(x, 0) + log1p(exp(-|x|)), overflow-safe log(1 + e^x).
double softplus(double x);

/// Piecewise dissipation factor; 1 at zero normal velocity, 0 beyond 2 v_d.
double dissipation(double phidot, double v_d);

/// sigma k log(1 + e^{-phi/sigma}) d_n(phidot); d_n = 1 with dissipation off.
double normal_force(double phi, double phidot, const CompliantParams& p);

/// d f_n / d phi at zero normal velocity (negative).
double normal_force_slope(double phi, const CompliantParams& p);

/// Potential U(phi) = integral of f_n from phi to infinity (zero dissipation),
/// so that -dU/dphi = f_n.
double contact_potential(double phi, const CompliantParams& p);

/// diag(alpha s, alpha s, s) with s = |d f_n / d phi|, in contact-frame
/// coordinates ordered like the columns of R_C.
Matrix3d contact_stiffness(double phi, const CompliantParams& p);

/// Stacked multi-contact stiffness operators. Rows of the stacked operators
/// follow `pairs`, three per contact in R_C column order (tx, ty, n), so
/// J_stack maps robot joint velocity to robot witness velocity in contact
/// coordinates and G_stack maps the object twist to the object witness velocity.
struct StiffnessSet {
  std::vector<PairId> pairs;
  std::vector<Matrix3d> Kc_contact;
  std::vector<Matrix3d> Kc_world;
  std::vector<Matrix3d> R_C;
  Matrix6d K_o = Matrix6d::Zero();
  MatrixXd G_stack;  // 3 N_c x 6
  MatrixXd J_stack;  // 3 N_c x n_r
  MatrixXd M_bar;    // blkdiag(cK) J_stack
  MatrixXd N_bar;    // blkdiag(cK) G_stack

  int size() const { return static_cast<int>(pairs.size()); }
};

/// Robot-object contacts only; object-environment entries are skipped.
StiffnessSet build_stiffness_set(const std::vector<ContactInfo>& contacts, int n_r,
                                 const CompliantParams& p);

}  // namespace cimpc
