#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cimpc/common.hpp"

namespace cimpc {

enum class JointType { Revolute, Prismatic };

enum class ObjectJointKind { Hinge, PlanarFree };

/// Which part of the system a frame belongs to.
enum class BodyRole { World, Robot, Object };

struct Sphere {
  Vector3d center = Vector3d::Zero();
  double radius = 0.0;
};

/// Segment p0-p1 swept by a sphere of the given radius.
struct Capsule {
  Vector3d p0 = Vector3d::Zero();
  Vector3d p1 = Vector3d::Zero();
  double radius = 0.0;
};

/// Points x with normal . (x - point) <= 0 are inside.
struct HalfSpace {
  Vector3d point = Vector3d::Zero();
  Vector3d normal = Vector3d::UnitZ();
};

using Shape = std::variant<Sphere, Capsule, HalfSpace>;

struct RobotJointSpec {
  std::string name;
  JointType type = JointType::Revolute;
  std::string parent;  // empty or "world" for a chain root
  Vector3d origin = Vector3d::Zero();
  Vector3d rpy = Vector3d::Zero();
  Vector3d axis = Vector3d::UnitZ();
  double lower = -1e9;
  double upper = 1e9;
  double stiffness = 1.0;  // N m/rad or N/m
  double mass = 0.0;       // kg, of the child link
  Vector3d com = Vector3d::Zero();
};

struct ObjectSpec {
  ObjectJointKind kind = ObjectJointKind::Hinge;
  Vector3d origin = Vector3d::Zero();
  Vector3d rpy = Vector3d::Zero();
  Vector3d axis = Vector3d::UnitZ();                // hinge axis
  Vector3d plane_x = Vector3d::UnitX();             // planar-free translation axes
  Vector3d plane_y = Vector3d::UnitY();
  VectorXd damping;                                 // per object DOF
  MatrixXd inertia;                                 // generalized inertia on object DOFs
  double mass = 0.0;
  Vector3d com = Vector3d::Zero();
};

struct GeometrySpec {
  std::string name;
  std::string frame;  // "world", "object" or a robot joint name
  Shape shape;
};

struct FrictionPair {
  std::string a;
  std::string b;
  double mu = 0.0;
};

struct ModelSpec {
  std::string name = "model";
  std::vector<RobotJointSpec> robot_joints;
  ObjectSpec object;
  std::vector<GeometrySpec> geometries;
  Vector3d gravity = Vector3d::Zero();
  double default_friction = 1.0;
  std::vector<FrictionPair> friction_pairs;
};

/// One joint of the combined robot + object kinematic forest.
struct Joint {
  std::string name;
  JointType type = JointType::Revolute;
  int parent = -1;  // -1: world
  Isometry3d placement = Isometry3d::Identity();
  Vector3d axis = Vector3d::UnitZ();
  double lower = -1e9;
  double upper = 1e9;
  double mass = 0.0;
  Vector3d com = Vector3d::Zero();
};

struct Geometry {
  std::string name;
  int frame = -1;  // joint index carrying the geometry, -1: world
  BodyRole role = BodyRole::World;
  Shape shape;
};

/// Immutable kinematic and inertial description of robot chains plus one
/// object body. Generalized coordinates are ordered q = [q_r; q_o].
class SystemModel {
 public:
  explicit SystemModel(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }

  int n_r() const { return n_r_; }
  int n_o() const { return n_o_; }
  int n_q() const { return n_r_ + n_o_; }

  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<Geometry>& geometries() const { return geometries_; }

  /// Joint index whose child body is the object.
  int object_body() const { return n_r_ + n_o_ - 1; }
  BodyRole role_of_frame(int frame) const;

  /// True when joint m moves body k (m lies on the chain from the world to k).
  bool moves(int m, int k) const { return ancestry_[k][m]; }

  const VectorXd& joint_stiffness() const { return stiffness_; }
  const MatrixXd& object_inertia() const { return spec_.object.inertia; }
  const VectorXd& object_damping() const { return spec_.object.damping; }
  const Vector3d& gravity() const { return spec_.gravity; }

  double friction(int geom_a, int geom_b) const;
  int geometry_index(const std::string& name) const;
  int joint_index(const std::string& name) const;

  nlohmann::json to_json() const;

 private:
  ModelSpec spec_;
  int n_r_ = 0;
  int n_o_ = 0;
  std::vector<Joint> joints_;
  std::vector<Geometry> geometries_;
  std::vector<std::vector<bool>> ancestry_;
  VectorXd stiffness_;
  std::vector<std::vector<double>> friction_;
};

ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json model_spec_to_json(const ModelSpec& spec);
SystemModel load_model(const std::string& path);

Isometry3d pose_from_xyz_rpy(const Vector3d& xyz, const Vector3d& rpy);

}  // namespace cimpc
