#pragma once

#include <vector>

#include "cimpc/common.hpp"
#include "cimpc/model.hpp"

namespace cimpc {

/// World-frame poses of every body at one configuration, plus the joint axes
/// and axis origins needed for Jacobians.
struct KinematicsState {
  VectorXd q;
  std::vector<Isometry3d> body;  // child body pose of each joint
  std::vector<Vector3d> axis;    // joint axis in world
  std::vector<Vector3d> origin;  // a point on the joint axis, in world
};

KinematicsState forward_kinematics(const SystemModel& model, const VectorXd& q);

/// Pose of a frame (-1 is the world).
Isometry3d frame_pose(const KinematicsState& kin, int frame);

/// Velocity of the world point p rigidly attached to `frame` per unit q_m.
Vector3d point_velocity_column(const SystemModel& model, const KinematicsState& kin,
                               int frame, const Vector3d& p, int m);

/// 3 x n_q Jacobian of the world point p rigidly attached to `frame`.
Matrix3Xd point_jacobian(const SystemModel& model, const KinematicsState& kin, int frame,
                         const Vector3d& p);

/// Derivative of point_jacobian(frame, p(q)) with respect to q_m, where dp is
/// the total derivative dp/dq_m of the (possibly sliding) point.
Matrix3Xd point_jacobian_derivative(const SystemModel& model, const KinematicsState& kin,
                                    int frame, const Vector3d& p, const Vector3d& dp,
                                    int m);

/// 6 x n_q map from qdot to [omega; v_origin] of `frame`.
MatrixXd frame_twist_jacobian(const SystemModel& model, const KinematicsState& kin,
                              int frame);

/// Generalized force of gravity, sum_j J_com,j^T m_j g.
VectorXd gravity_forces(const SystemModel& model, const KinematicsState& kin);

/// d(gravity_forces)/dq.
MatrixXd gravity_forces_jacobian(const SystemModel& model, const KinematicsState& kin);

}  // namespace cimpc
