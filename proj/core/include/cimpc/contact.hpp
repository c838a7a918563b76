#pragma once

#include <compare>
#include <optional>
#include <vector>

#include "cimpc/common.hpp"
#include "cimpc/geometry.hpp"
#include "cimpc/kinematics.hpp"
#include "cimpc/model.hpp"

namespace cimpc {

/// Geometry indices of a candidate pair. For robot-object pairs `a` is the
/// robot geometry and `b` the object geometry; for object-environment pairs
/// `a` is the object geometry and `b` the environment geometry.
struct PairId {
  int a = -1;
  int b = -1;
  auto operator<=>(const PairId&) const = default;
};

/// One detected contact, frozen at the configuration it was computed at.
///
/// J maps qdot to the velocity of witness_a relative to witness_b, expressed
/// in the contact frame with rows ordered [normal; tangent_x; tangent_y]. A
/// positive normal row means separation. R_C holds the columns
/// (tangent_x, tangent_y, normal).
struct ContactInfo {
  PairId pair;
  int frame_a = -1;
  int frame_b = -1;
  double phi = 0.0;
  Vector3d witness_a = Vector3d::Zero();
  Vector3d witness_b = Vector3d::Zero();
  Vector3d normal = Vector3d::UnitZ();
  Matrix3d R_C = Matrix3d::Identity();
  double mu = 0.0;
  MatrixXd J;       // 3 x n_q, contact frame, rows [n; tx; ty]
  Matrix3Xd J_rel;  // 3 x n_q, world frame
  Matrix36d G = Matrix36d::Zero();  // object twist [w; v] -> object witness velocity
  Proximity proximity;

  bool robot_object() const { return role_a == BodyRole::Robot; }
  BodyRole role_a = BodyRole::Robot;
  BodyRole role_b = BodyRole::Object;

  /// Contact-frame rows of J: tangential 2 x n_q block.
  auto J_n() const { return J.row(0); }
  auto J_t() const { return J.bottomRows(2); }
};

/// Orthonormal contact frame with the normal as z. Without a sliding
/// direction, tangent_x is the coordinate axis of the normal's
/// smallest-magnitude component, Gram-Schmidt projected. A sliding velocity
/// whose tangential part exceeds 1e-6 m/s fixes tangent_y instead.
Matrix3d contact_frame(const Vector3d& normal,
                       const std::optional<Vector3d>& sliding_velocity = std::nullopt);

/// G (3x6) maps the object twist [omega; v_origin] to the velocity of a
/// point rigidly attached to the object.
Matrix36d grasp_matrix(const Isometry3d& object_pose, const Vector3d& contact_point);

/// All robot-object and object-environment pairs with phi <= phi_max,
/// sorted by pair id. When qdot is given, tangent frames align with the
/// relative sliding velocity.
std::vector<ContactInfo> detect_contacts(const SystemModel& model, const VectorXd& q,
                                         double phi_max,
                                         const VectorXd* qdot = nullptr);
std::vector<ContactInfo> detect_contacts(const SystemModel& model,
                                         const KinematicsState& kin, double phi_max,
                                         const VectorXd* qdot = nullptr);

/// Every candidate pair regardless of distance.
std::vector<PairId> candidate_pairs(const SystemModel& model);

/// Evaluate one pair at the given configuration without a distance cutoff.
ContactInfo evaluate_pair(const SystemModel& model, const KinematicsState& kin, PairId pair,
                          const VectorXd* qdot = nullptr);

/// Re-orient the tangent basis so tangent_y follows the sliding velocity J_rel v.
void align_contact_frame(ContactInfo& contact, const VectorXd& v);

/// Configuration derivatives of one contact, column m is d/dq_m.
struct ContactDerivatives {
  VectorXd dphi;
  std::vector<Vector3d> dnormal;
  std::vector<Matrix3Xd> dJ_rel;
};

ContactDerivatives contact_derivatives(const SystemModel& model, const KinematicsState& kin,
                                       const ContactInfo& contact);

}  // namespace cimpc
