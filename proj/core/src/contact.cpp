#include "cimpc/contact.hpp"

#include <algorithm>
#include <cmath>

namespace cimpc {

namespace {

double radius_of(const Shape& s) {
  if (const auto* sp = std::get_if<Sphere>(&s)) return sp->radius;
  if (const auto* c = std::get_if<Capsule>(&s)) return c->radius;
  return 0.0;
}

// Derivative of a shape's core point along q_m. `other_core` and its
// derivative are needed only for a capsule whose closest point slides.
Vector3d core_derivative(const SystemModel& model, const KinematicsState& kin, int frame,
                         const Shape& world_shape, const Vector3d& core, double t, bool t_free,
                         const Vector3d& other_core, const Vector3d& d_other_core, int m) {
  if (std::holds_alternative<Sphere>(world_shape)) {
    return point_velocity_column(model, kin, frame, core, m);
  }
  const auto& cap = std::get<Capsule>(world_shape);
  const Vector3d ds0 = point_velocity_column(model, kin, frame, cap.p0, m);
  const Vector3d ds1 = point_velocity_column(model, kin, frame, cap.p1, m);
  const Vector3d e = cap.p1 - cap.p0;
  const Vector3d de = ds1 - ds0;
  double dt = 0.0;
  if (t_free) {
    const double ee = e.squaredNorm();
    dt = ((d_other_core - ds0).dot(e) + (other_core - cap.p0).dot(de)) / ee -
         2.0 * t * e.dot(de) / ee;
  }
  return ds0 + t * de + dt * e;
}

}  // namespace

Matrix3d contact_frame(const Vector3d& normal, const std::optional<Vector3d>& sliding_velocity) {
  const double nn = normal.norm();
  if (nn < 1e-12) throw GeometryError("contact_frame: zero normal");
  const Vector3d n = normal / nn;
  Vector3d tx;
  Vector3d ty;
  Vector3d vt = Vector3d::Zero();
  if (sliding_velocity) vt = *sliding_velocity - n.dot(*sliding_velocity) * n;
  if (vt.norm() > 1e-6) {
    ty = vt.normalized();
    tx = ty.cross(n);
  } else {
    Eigen::Index i = 0;
    n.cwiseAbs().minCoeff(&i);
    const Vector3d e = Vector3d::Unit(i);
    tx = (e - n.dot(e) * n).normalized();
    ty = n.cross(tx);
  }
  Matrix3d r;
  r.col(0) = tx;
  r.col(1) = ty;
  r.col(2) = n;
  return r;
}

Matrix36d grasp_matrix(const Isometry3d& object_pose, const Vector3d& contact_point) {
  Matrix36d g;
  g.leftCols<3>() = -skew(contact_point - object_pose.translation());
  g.rightCols<3>().setIdentity();
  return g;
}

std::vector<PairId> candidate_pairs(const SystemModel& model) {
  const auto& geoms = model.geometries();
  std::vector<PairId> pairs;
  for (int i = 0; i < static_cast<int>(geoms.size()); ++i) {
    for (int j = 0; j < static_cast<int>(geoms.size()); ++j) {
      const bool ro = geoms[i].role == BodyRole::Robot && geoms[j].role == BodyRole::Object;
      const bool ow = geoms[i].role == BodyRole::Object && geoms[j].role == BodyRole::World;
      if (ro || ow) pairs.push_back({i, j});
    }
  }
  return pairs;
}

ContactInfo evaluate_pair(const SystemModel& model, const KinematicsState& kin, PairId pair,
                          const VectorXd* qdot) {
  const Geometry& ga = model.geometries().at(pair.a);
  const Geometry& gb = model.geometries().at(pair.b);
  ContactInfo c;
  c.pair = pair;
  c.frame_a = ga.frame;
  c.frame_b = gb.frame;
  c.role_a = ga.role;
  c.role_b = gb.role;
  c.proximity = signed_distance(transform_shape(ga.shape, frame_pose(kin, ga.frame)),
                                transform_shape(gb.shape, frame_pose(kin, gb.frame)));
  c.phi = c.proximity.phi;
  c.witness_a = c.proximity.witness_a;
  c.witness_b = c.proximity.witness_b;
  c.normal = c.proximity.normal;
  c.mu = model.friction(pair.a, pair.b);
  c.J_rel = point_jacobian(model, kin, ga.frame, c.witness_a) -
            point_jacobian(model, kin, gb.frame, c.witness_b);
  const Vector3d& p_obj = c.robot_object() ? c.witness_b : c.witness_a;
  c.G = grasp_matrix(kin.body[model.object_body()], p_obj);
  if (qdot) {
    require_size(qdot->size(), model.n_q(), "evaluate_pair qdot");
    c.R_C = contact_frame(c.normal, Vector3d(c.J_rel * *qdot));
  } else {
    c.R_C = contact_frame(c.normal);
  }
  c.J.resize(3, model.n_q());
  c.J.row(0) = c.normal.transpose() * c.J_rel;
  c.J.row(1) = c.R_C.col(0).transpose() * c.J_rel;
  c.J.row(2) = c.R_C.col(1).transpose() * c.J_rel;
  return c;
}

void align_contact_frame(ContactInfo& c, const VectorXd& v) {
  c.R_C = contact_frame(c.normal, Vector3d(c.J_rel * v));
  c.J.row(1) = c.R_C.col(0).transpose() * c.J_rel;
  c.J.row(2) = c.R_C.col(1).transpose() * c.J_rel;
}

std::vector<ContactInfo> detect_contacts(const SystemModel& model, const KinematicsState& kin,
                                         double phi_max, const VectorXd* qdot) {
  if (!(phi_max > 0.0)) throw ConfigError("detect_contacts: phi_max must be positive");
  std::vector<ContactInfo> out;
  for (const PairId& p : candidate_pairs(model)) {
    ContactInfo c = evaluate_pair(model, kin, p, qdot);
    if (c.phi <= phi_max) out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(),
            [](const ContactInfo& x, const ContactInfo& y) { return x.pair < y.pair; });
  return out;
}

std::vector<ContactInfo> detect_contacts(const SystemModel& model, const VectorXd& q,
                                         double phi_max, const VectorXd* qdot) {
  return detect_contacts(model, forward_kinematics(model, q), phi_max, qdot);
}

ContactDerivatives contact_derivatives(const SystemModel& model, const KinematicsState& kin,
                                       const ContactInfo& c) {
  const int nq = model.n_q();
  const Geometry& ga = model.geometries().at(c.pair.a);
  const Geometry& gb = model.geometries().at(c.pair.b);
  const Shape sa = transform_shape(ga.shape, frame_pose(kin, ga.frame));
  const Shape sb = transform_shape(gb.shape, frame_pose(kin, gb.frame));
  const double ra = radius_of(sa);
  const double rb = radius_of(sb);
  const Proximity& px = c.proximity;
  const Vector3d& n = px.normal;
  const bool plane = std::holds_alternative<HalfSpace>(sb);
  const double dist = (px.core_a - px.core_b).norm();

  ContactDerivatives d;
  d.dphi.resize(nq);
  d.dnormal.resize(nq);
  d.dJ_rel.resize(nq);
  for (int m = 0; m < nq; ++m) {
    // At most one core point slides (capsule vs sphere), so the sphere side is
    // differentiated first and fed to the capsule side.
    Vector3d dca;
    Vector3d dcb = Vector3d::Zero();
    if (plane) {
      dca = core_derivative(model, kin, ga.frame, sa, px.core_a, px.t_a, false, px.core_b,
                            Vector3d::Zero(), m);
    } else if (std::holds_alternative<Sphere>(sa)) {
      dca = point_velocity_column(model, kin, ga.frame, px.core_a, m);
      dcb = core_derivative(model, kin, gb.frame, sb, px.core_b, px.t_b, px.t_b_free,
                            px.core_a, dca, m);
    } else {
      dcb = point_velocity_column(model, kin, gb.frame, px.core_b, m);
      dca = core_derivative(model, kin, ga.frame, sa, px.core_a, px.t_a, px.t_a_free,
                            px.core_b, dcb, m);
    }
    Vector3d dn = Vector3d::Zero();
    Vector3d dpa;
    Vector3d dpb;
    if (plane) {
      d.dphi[m] = n.dot(dca);
      dpa = dca;
      dpb = dca - n.dot(dca) * n;
    } else {
      const Vector3d dd = dca - dcb;
      dn = (dd - n.dot(dd) * n) / dist;
      d.dphi[m] = n.dot(dd);
      dpa = dca - ra * dn;
      dpb = dcb + rb * dn;
    }
    d.dnormal[m] = dn;
    d.dJ_rel[m] = point_jacobian_derivative(model, kin, ga.frame, c.witness_a, dpa, m) -
                  point_jacobian_derivative(model, kin, gb.frame, c.witness_b, dpb, m);
  }
  return d;
}

}  // namespace cimpc
