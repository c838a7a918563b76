#include "cimpc/compliant.hpp"

#include <cmath>
#include <numbers>

namespace cimpc {

namespace {

// Li2(w) for 0 <= w <= 1/2 by its power series.
double dilog_small(double w) {
  double sum = 0.0;
  double term = w;
  for (int k = 1; k < 200; ++k) {
    const double add = term / (static_cast<double>(k) * k);
    sum += add;
    if (add < 1e-18 * sum) break;
    term *= w;
  }
  return sum;
}

// Li2(-z) for z > 0 via the Landen and inversion identities.
double dilog_neg(double z) {
  if (z <= 1.0) {
    const double l = std::log1p(z);
    return -dilog_small(z / (1.0 + z)) - 0.5 * l * l;
  }
  const double lz = std::log(z);
  return -std::numbers::pi * std::numbers::pi / 6.0 - 0.5 * lz * lz - dilog_neg(1.0 / z);
}

}  // namespace

void CompliantParams::validate() const {
  if (!(sigma > 0.0) || !(k > 0.0) || !(v_d > 0.0) || !(alpha >= 0.0)) {
    throw ConfigError("compliant contact parameters need sigma, k, v_d > 0 and alpha >= 0");
  }
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double dissipation(double phidot, double v_d) {
  if (phidot < 0.0) return 1.0 - phidot / v_d;
  if (phidot < 2.0 * v_d) {
    const double r = phidot / v_d - 2.0;
    return 0.25 * r * r;
  }
  return 0.0;
}

double normal_force(double phi, double phidot, const CompliantParams& p) {
  const double dn = p.use_dissipation ? dissipation(phidot, p.v_d) : 1.0;
  return p.sigma * p.k * softplus(-phi / p.sigma) * dn;
}

double normal_force_slope(double phi, const CompliantParams& p) {
  // -k * logistic(-phi / sigma), written to avoid overflow for either sign
  const double x = phi / p.sigma;
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return -p.k * e / (1.0 + e);
  }
  return -p.k / (1.0 + std::exp(x));
}

double contact_potential(double phi, const CompliantParams& p) {
  const double z = std::exp(-phi / p.sigma);
  if (!std::isfinite(z)) {
    // deep penetration: the force is -k phi plus an exponentially small term
    return 0.5 * p.k * phi * phi + p.sigma * p.sigma * p.k * std::numbers::pi *
                                       std::numbers::pi / 6.0;
  }
  return -p.sigma * p.sigma * p.k * dilog_neg(z);
}

Matrix3d contact_stiffness(double phi, const CompliantParams& p) {
  const double s = -normal_force_slope(phi, p);
  return Vector3d(p.alpha * s, p.alpha * s, s).asDiagonal();
}

StiffnessSet build_stiffness_set(const std::vector<ContactInfo>& contacts, int n_r,
                                 const CompliantParams& p) {
  StiffnessSet ss;
  std::vector<const ContactInfo*> used;
  for (const auto& c : contacts) {
    if (c.robot_object()) used.push_back(&c);
  }
  const auto nc = static_cast<Eigen::Index>(used.size());
  ss.G_stack = MatrixXd::Zero(3 * nc, 6);
  ss.J_stack = MatrixXd::Zero(3 * nc, n_r);
  ss.M_bar = MatrixXd::Zero(3 * nc, n_r);
  ss.N_bar = MatrixXd::Zero(3 * nc, 6);
  for (Eigen::Index i = 0; i < nc; ++i) {
    const ContactInfo& c = *used[static_cast<std::size_t>(i)];
    const Matrix3d cK = contact_stiffness(c.phi, p);
    const Matrix3d Kw = c.R_C * cK * c.R_C.transpose();
    ss.pairs.push_back(c.pair);
    ss.Kc_contact.push_back(cK);
    ss.Kc_world.push_back(Kw);
    ss.R_C.push_back(c.R_C);
    ss.K_o += c.G.transpose() * Kw * c.G;
    // Robot columns of J_rel are the robot witness Jacobian.
    const MatrixXd Jc = c.R_C.transpose() * c.J_rel.leftCols(n_r);
    const Matrix36d Gc = c.R_C.transpose() * c.G;
    ss.J_stack.middleRows(3 * i, 3) = Jc;
    ss.G_stack.middleRows(3 * i, 3) = Gc;
    ss.M_bar.middleRows(3 * i, 3) = cK * Jc;
    ss.N_bar.middleRows(3 * i, 3) = cK * Gc;
  }
  ss.K_o = 0.5 * (ss.K_o + ss.K_o.transpose());
  return ss;
}

}  // namespace cimpc
