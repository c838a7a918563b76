#include "cimpc/kinematics.hpp"

namespace cimpc {

KinematicsState forward_kinematics(const SystemModel& model, const VectorXd& q) {
  require_size(q.size(), model.n_q(), "forward_kinematics q");
  const auto& joints = model.joints();
  const int nq = model.n_q();
  KinematicsState kin;
  kin.q = q;
  kin.body.resize(nq);
  kin.axis.resize(nq);
  kin.origin.resize(nq);
  for (int j = 0; j < nq; ++j) {
    const Joint& jt = joints[j];
    const Isometry3d parent = jt.parent < 0 ? Isometry3d::Identity() : kin.body[jt.parent];
    const Isometry3d t0 = parent * jt.placement;
    kin.axis[j] = t0.linear() * jt.axis;
    kin.origin[j] = t0.translation();
    Isometry3d motion = Isometry3d::Identity();
    if (jt.type == JointType::Revolute) {
      motion.linear() = Eigen::AngleAxisd(q[j], jt.axis).toRotationMatrix();
    } else {
      motion.translation() = q[j] * jt.axis;
    }
    kin.body[j] = t0 * motion;
  }
  return kin;
}

Isometry3d frame_pose(const KinematicsState& kin, int frame) {
  return frame < 0 ? Isometry3d::Identity() : kin.body[frame];
}

Vector3d point_velocity_column(const SystemModel& model, const KinematicsState& kin,
                               int frame, const Vector3d& p, int m) {
  if (frame < 0 || !model.moves(m, frame)) return Vector3d::Zero();
  if (model.joints()[m].type == JointType::Revolute) {
    return kin.axis[m].cross(p - kin.origin[m]);
  }
  return kin.axis[m];
}

Matrix3Xd point_jacobian(const SystemModel& model, const KinematicsState& kin, int frame,
                         const Vector3d& p) {
  const int nq = model.n_q();
  Matrix3Xd jac = Matrix3Xd::Zero(3, nq);
  if (frame < 0) return jac;
  for (int k = 0; k < nq; ++k) {
    if (model.moves(k, frame)) jac.col(k) = point_velocity_column(model, kin, frame, p, k);
  }
  return jac;
}

Matrix3Xd point_jacobian_derivative(const SystemModel& model, const KinematicsState& kin,
                                    int frame, const Vector3d& p, const Vector3d& dp,
                                    int m) {
  const int nq = model.n_q();
  Matrix3Xd djac = Matrix3Xd::Zero(3, nq);
  if (frame < 0) return djac;
  const auto& joints = model.joints();
  const bool m_revolute = joints[m].type == JointType::Revolute;
  for (int k = 0; k < nq; ++k) {
    if (!model.moves(k, frame)) continue;
    // Joint m moves joint k's axis only when it sits strictly above k.
    const bool m_above_k = m != k && model.moves(m, k);
    Vector3d dz = Vector3d::Zero();
    Vector3d dorigin = Vector3d::Zero();
    if (m_above_k) {
      if (m_revolute) {
        dz = kin.axis[m].cross(kin.axis[k]);
        dorigin = kin.axis[m].cross(kin.origin[k] - kin.origin[m]);
      } else {
        dorigin = kin.axis[m];
      }
    }
    if (joints[k].type == JointType::Revolute) {
      djac.col(k) = dz.cross(p - kin.origin[k]) + kin.axis[k].cross(dp - dorigin);
    } else {
      djac.col(k) = dz;
    }
  }
  return djac;
}

MatrixXd frame_twist_jacobian(const SystemModel& model, const KinematicsState& kin,
                              int frame) {
  const int nq = model.n_q();
  MatrixXd jac = MatrixXd::Zero(6, nq);
  if (frame < 0) return jac;
  const Vector3d o = kin.body[frame].translation();
  for (int k = 0; k < nq; ++k) {
    if (!model.moves(k, frame)) continue;
    if (model.joints()[k].type == JointType::Revolute) {
      jac.block<3, 1>(0, k) = kin.axis[k];
      jac.block<3, 1>(3, k) = kin.axis[k].cross(o - kin.origin[k]);
    } else {
      jac.block<3, 1>(3, k) = kin.axis[k];
    }
  }
  return jac;
}

VectorXd gravity_forces(const SystemModel& model, const KinematicsState& kin) {
  const int nq = model.n_q();
  VectorXd tau = VectorXd::Zero(nq);
  if (model.gravity().squaredNorm() == 0.0) return tau;
  for (int j = 0; j < nq; ++j) {
    const Joint& jt = model.joints()[j];
    if (jt.mass <= 0.0) continue;
    const Vector3d c = kin.body[j] * jt.com;
    tau += point_jacobian(model, kin, j, c).transpose() * (jt.mass * model.gravity());
  }
  return tau;
}

MatrixXd gravity_forces_jacobian(const SystemModel& model, const KinematicsState& kin) {
  const int nq = model.n_q();
  MatrixXd dtau = MatrixXd::Zero(nq, nq);
  if (model.gravity().squaredNorm() == 0.0) return dtau;
  for (int j = 0; j < nq; ++j) {
    const Joint& jt = model.joints()[j];
    if (jt.mass <= 0.0) continue;
    const Vector3d c = kin.body[j] * jt.com;
    const Vector3d w = jt.mass * model.gravity();
    for (int m = 0; m < nq; ++m) {
      const Vector3d dc = point_velocity_column(model, kin, j, c, m);
      dtau.col(m) += point_jacobian_derivative(model, kin, j, c, dc, m).transpose() * w;
    }
  }
  return dtau;
}

}  // namespace cimpc
