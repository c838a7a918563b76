#include "cimpc/model.hpp"

#include "cimpc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace cimpc {

namespace {

using nlohmann::json;

Vector3d vec3(const json& j, const char* key, const Vector3d& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) {
    throw ConfigError(std::string("field '") + key + "' must be a 3-vector");
  }
  return Vector3d(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

json to_array(const Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

JointType joint_type_from(const std::string& s) {
  if (s == "revolute") return JointType::Revolute;
  if (s == "prismatic") return JointType::Prismatic;
  throw ConfigError("unknown joint type '" + s + "'");
}

const char* to_string(JointType t) {
  return t == JointType::Revolute ? "revolute" : "prismatic";
}

Shape shape_from_json(const json& g) {
  const auto type = g.at("type").get<std::string>();
  if (type == "sphere") {
    return Sphere{vec3(g, "center", Vector3d::Zero()), g.at("radius").get<double>()};
  }
  if (type == "capsule") {
    return Capsule{vec3(g, "p0", Vector3d::Zero()), vec3(g, "p1", Vector3d::Zero()),
                   g.at("radius").get<double>()};
  }
  if (type == "halfspace") {
    return HalfSpace{vec3(g, "point", Vector3d::Zero()),
                     vec3(g, "normal", Vector3d::UnitZ())};
  }
  throw ConfigError("unknown geometry type '" + type + "'");
}

json shape_to_json(const Shape& shape) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return {{"type", "sphere"}, {"center", to_array(s.center)}, {"radius", s.radius}};
        } else if constexpr (std::is_same_v<T, Capsule>) {
          return {{"type", "capsule"},
                  {"p0", to_array(s.p0)},
                  {"p1", to_array(s.p1)},
                  {"radius", s.radius}};
        } else {
          return {{"type", "halfspace"},
                  {"point", to_array(s.point)},
                  {"normal", to_array(s.normal)}};
        }
      },
      shape);
}

}  // namespace

Isometry3d pose_from_xyz_rpy(const Vector3d& xyz, const Vector3d& rpy) {
  Isometry3d t = Isometry3d::Identity();
  t.linear() = (Eigen::AngleAxisd(rpy.z(), Vector3d::UnitZ()) *
                Eigen::AngleAxisd(rpy.y(), Vector3d::UnitY()) *
                Eigen::AngleAxisd(rpy.x(), Vector3d::UnitX()))
                   .toRotationMatrix();
  t.translation() = xyz;
  return t;
}

SystemModel::SystemModel(ModelSpec spec) : spec_(std::move(spec)) {
  n_r_ = static_cast<int>(spec_.robot_joints.size());
  auto& obj = spec_.object;
  n_o_ = obj.kind == ObjectJointKind::Hinge ? 1 : 3;

  for (int i = 0; i < n_r_; ++i) {
    const auto& rj = spec_.robot_joints[i];
    Joint j;
    j.name = rj.name;
    j.type = rj.type;
    if (rj.parent.empty() || rj.parent == "world") {
      j.parent = -1;
    } else {
      auto it = std::find_if(joints_.begin(), joints_.end(),
                             [&](const Joint& p) { return p.name == rj.parent; });
      if (it == joints_.end()) {
        throw ConfigError("joint '" + rj.name + "' references unknown or later parent '" +
                          rj.parent + "'");
      }
      j.parent = static_cast<int>(it - joints_.begin());
    }
    j.placement = pose_from_xyz_rpy(rj.origin, rj.rpy);
    if (rj.axis.norm() < 1e-12) throw ConfigError("joint '" + rj.name + "' has zero axis");
    j.axis = rj.axis.normalized();
    j.lower = rj.lower;
    j.upper = rj.upper;
    j.mass = rj.mass;
    j.com = rj.com;
    if (!(rj.stiffness > 0.0)) {
      throw ConfigError("joint '" + rj.name + "' stiffness must be strictly positive");
    }
    joints_.push_back(j);
  }

  const Isometry3d base = pose_from_xyz_rpy(obj.origin, obj.rpy);
  if (obj.kind == ObjectJointKind::Hinge) {
    if (obj.axis.norm() < 1e-12) throw ConfigError("hinge axis is zero");
    Joint h;
    h.name = "object_hinge";
    h.type = JointType::Revolute;
    h.placement = base;
    h.axis = obj.axis.normalized();
    h.mass = obj.mass;
    h.com = obj.com;
    joints_.push_back(h);
  } else {
    const Vector3d ax = obj.plane_x.normalized();
    const Vector3d ay = (obj.plane_y - obj.plane_y.dot(ax) * ax).normalized();
    Joint tx{"object_x", JointType::Prismatic, -1, base, ax};
    Joint ty{"object_y", JointType::Prismatic, n_r_, Isometry3d::Identity(), ay};
    Joint rz{"object_yaw", JointType::Revolute, n_r_ + 1, Isometry3d::Identity(),
             ax.cross(ay)};
    rz.mass = obj.mass;
    rz.com = obj.com;
    joints_.push_back(tx);
    joints_.push_back(ty);
    joints_.push_back(rz);
  }

  const int nq = n_q();
  ancestry_.assign(nq, std::vector<bool>(nq, false));
  for (int k = 0; k < nq; ++k) {
    for (int m = k; m >= 0; m = joints_[m].parent) ancestry_[k][m] = true;
  }

  stiffness_.resize(n_r_);
  for (int i = 0; i < n_r_; ++i) stiffness_[i] = spec_.robot_joints[i].stiffness;

  if (obj.inertia.size() == 0) obj.inertia = MatrixXd::Identity(n_o_, n_o_);
  if (obj.inertia.rows() != n_o_ || obj.inertia.cols() != n_o_) {
    throw ConfigError("object inertia must be " + std::to_string(n_o_) + "x" +
                      std::to_string(n_o_));
  }
  if ((obj.inertia - obj.inertia.transpose()).norm() > 1e-12 * (1.0 + obj.inertia.norm())) {
    throw ConfigError("object inertia must be symmetric");
  }
  Eigen::LLT<MatrixXd> llt(obj.inertia);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("object inertia must be positive definite");
  }
  if (obj.damping.size() == 0) obj.damping = VectorXd::Zero(n_o_);
  if (obj.damping.size() != n_o_) throw ConfigError("object damping has wrong size");
  if ((obj.damping.array() < 0.0).any()) throw ConfigError("object damping must be >= 0");

  for (const auto& gs : spec_.geometries) {
    Geometry g;
    g.name = gs.name;
    g.shape = gs.shape;
    if (gs.frame == "world" || gs.frame.empty()) {
      g.frame = -1;
      g.role = BodyRole::World;
    } else if (gs.frame == "object") {
      g.frame = object_body();
      g.role = BodyRole::Object;
    } else {
      g.frame = joint_index(gs.frame);
      if (g.frame < 0 || g.frame >= n_r_) {
        throw ConfigError("geometry '" + gs.name + "' attached to unknown frame '" +
                          gs.frame + "'");
      }
      g.role = BodyRole::Robot;
    }
    if (const auto* hs = std::get_if<HalfSpace>(&g.shape)) {
      if (g.role != BodyRole::World) {
        throw ConfigError("half-space '" + gs.name + "' must be attached to the world");
      }
      if (hs->normal.norm() < 1e-12) throw ConfigError("half-space normal is zero");
      std::get<HalfSpace>(g.shape).normal.normalize();
    } else {
      const double r = std::visit(
          [](const auto& s) -> double {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, HalfSpace>) {
              return 0.0;
            } else {
              return s.radius;
            }
          },
          g.shape);
      if (!(r > 0.0)) throw ConfigError("geometry '" + gs.name + "' needs a positive radius");
    }
    if (geometry_index(g.name) >= 0) throw ConfigError("duplicate geometry '" + g.name + "'");
    geometries_.push_back(g);
  }

  for (const auto& ga : geometries_) {
    for (const auto& gb : geometries_) {
      const bool candidate = (ga.role == BodyRole::Robot && gb.role == BodyRole::Object) ||
                             (ga.role == BodyRole::Object && gb.role == BodyRole::World);
      if (candidate && !is_supported_pair(ga.shape, gb.shape)) {
        throw ConfigError("unsupported geometry pair '" + ga.name + "' / '" + gb.name + "'");
      }
    }
  }

  if (spec_.default_friction < 0.0) throw ConfigError("friction must be >= 0");
  const auto ng = geometries_.size();
  friction_.assign(ng, std::vector<double>(ng, spec_.default_friction));
  for (const auto& fp : spec_.friction_pairs) {
    const int a = geometry_index(fp.a);
    const int b = geometry_index(fp.b);
    if (a < 0 || b < 0) throw ConfigError("friction pair references unknown geometry");
    if (fp.mu < 0.0) throw ConfigError("friction must be >= 0");
    friction_[a][b] = friction_[b][a] = fp.mu;
  }
}

BodyRole SystemModel::role_of_frame(int frame) const {
  if (frame < 0) return BodyRole::World;
  return frame < n_r_ ? BodyRole::Robot : BodyRole::Object;
}

double SystemModel::friction(int geom_a, int geom_b) const {
  return friction_.at(geom_a).at(geom_b);
}

int SystemModel::geometry_index(const std::string& name) const {
  for (std::size_t i = 0; i < geometries_.size(); ++i) {
    if (geometries_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int SystemModel::joint_index(const std::string& name) const {
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    if (joints_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

nlohmann::json SystemModel::to_json() const {
  auto j = model_spec_to_json(spec_);
  j["n_q_r"] = n_r_;
  j["n_q_o"] = n_o_;
  return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  try {
    spec.name = j.value("name", std::string("model"));
    spec.gravity = vec3(j, "gravity", Vector3d::Zero());
    for (const auto& rj : j.at("robot").at("joints")) {
      RobotJointSpec s;
      s.name = rj.at("name").get<std::string>();
      s.type = joint_type_from(rj.value("type", std::string("revolute")));
      s.parent = rj.value("parent", std::string("world"));
      s.origin = vec3(rj, "origin", Vector3d::Zero());
      s.rpy = vec3(rj, "rpy", Vector3d::Zero());
      s.axis = vec3(rj, "axis", Vector3d::UnitZ());
      if (rj.contains("limits")) {
        s.lower = rj.at("limits").at(0).get<double>();
        s.upper = rj.at("limits").at(1).get<double>();
      }
      s.stiffness = rj.at("stiffness").get<double>();
      s.mass = rj.value("mass", 0.0);
      s.com = vec3(rj, "com", Vector3d::Zero());
      spec.robot_joints.push_back(s);
    }
    const auto& o = j.at("object");
    const auto kind = o.at("joint").get<std::string>();
    if (kind == "hinge") {
      spec.object.kind = ObjectJointKind::Hinge;
    } else if (kind == "planar_free") {
      spec.object.kind = ObjectJointKind::PlanarFree;
    } else {
      throw ConfigError("unknown object joint '" + kind + "'");
    }
    const int n_o = spec.object.kind == ObjectJointKind::Hinge ? 1 : 3;
    spec.object.origin = vec3(o, "origin", Vector3d::Zero());
    spec.object.rpy = vec3(o, "rpy", Vector3d::Zero());
    spec.object.axis = vec3(o, "axis", Vector3d::UnitZ());
    if (o.contains("plane_axes")) {
      const auto& pa = o.at("plane_axes");
      spec.object.plane_x = Vector3d(pa[0][0], pa[0][1], pa[0][2]);
      spec.object.plane_y = Vector3d(pa[1][0], pa[1][1], pa[1][2]);
    }
    spec.object.damping = VectorXd::Zero(n_o);
    if (o.contains("damping")) {
      const auto& d = o.at("damping");
      if (d.is_number()) {
        spec.object.damping.setConstant(d.get<double>());
      } else {
        if (static_cast<int>(d.size()) != n_o) throw ConfigError("object damping size");
        for (int i = 0; i < n_o; ++i) spec.object.damping[i] = d[i].get<double>();
      }
    }
    spec.object.inertia = MatrixXd::Identity(n_o, n_o);
    if (o.contains("inertia")) {
      const auto& m = o.at("inertia");
      if (m.is_number()) {
        spec.object.inertia *= m.get<double>();
      } else if (m.size() == static_cast<std::size_t>(n_o) && m[0].is_number()) {
        for (int i = 0; i < n_o; ++i) spec.object.inertia(i, i) = m[i].get<double>();
      } else {
        if (static_cast<int>(m.size()) != n_o) throw ConfigError("object inertia size");
        for (int r = 0; r < n_o; ++r) {
          for (int c = 0; c < n_o; ++c) spec.object.inertia(r, c) = m[r][c].get<double>();
        }
      }
    }
    spec.object.mass = o.value("mass", 0.0);
    spec.object.com = vec3(o, "com", Vector3d::Zero());
    for (const auto& g : j.at("geometries")) {
      spec.geometries.push_back(GeometrySpec{g.at("name").get<std::string>(),
                                             g.at("frame").get<std::string>(),
                                             shape_from_json(g)});
    }
    if (j.contains("friction")) {
      const auto& f = j.at("friction");
      spec.default_friction = f.value("default", 1.0);
      if (f.contains("pairs")) {
        for (const auto& p : f.at("pairs")) {
          spec.friction_pairs.push_back(FrictionPair{p.at("a").get<std::string>(),
                                                     p.at("b").get<std::string>(),
                                                     p.at("mu").get<double>()});
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model description: ") + e.what());
  }
  return spec;
}

nlohmann::json model_spec_to_json(const ModelSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["gravity"] = to_array(spec.gravity);
  json joints = json::array();
  for (const auto& rj : spec.robot_joints) {
    joints.push_back({{"name", rj.name},
                      {"type", to_string(rj.type)},
                      {"parent", rj.parent.empty() ? "world" : rj.parent},
                      {"origin", to_array(rj.origin)},
                      {"rpy", to_array(rj.rpy)},
                      {"axis", to_array(rj.axis)},
                      {"limits", {rj.lower, rj.upper}},
                      {"stiffness", rj.stiffness},
                      {"mass", rj.mass},
                      {"com", to_array(rj.com)}});
  }
  j["robot"]["joints"] = joints;
  const auto& o = spec.object;
  json obj;
  obj["joint"] = o.kind == ObjectJointKind::Hinge ? "hinge" : "planar_free";
  obj["origin"] = to_array(o.origin);
  obj["rpy"] = to_array(o.rpy);
  obj["axis"] = to_array(o.axis);
  obj["plane_axes"] = {to_array(o.plane_x), to_array(o.plane_y)};
  obj["damping"] = std::vector<double>(o.damping.data(), o.damping.data() + o.damping.size());
  json inertia = json::array();
  for (int r = 0; r < o.inertia.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < o.inertia.cols(); ++c) row.push_back(o.inertia(r, c));
    inertia.push_back(row);
  }
  obj["inertia"] = inertia;
  obj["mass"] = o.mass;
  obj["com"] = to_array(o.com);
  j["object"] = obj;
  json geoms = json::array();
  for (const auto& g : spec.geometries) {
    auto gj = shape_to_json(g.shape);
    gj["name"] = g.name;
    gj["frame"] = g.frame;
    geoms.push_back(gj);
  }
  j["geometries"] = geoms;
  json pairs = json::array();
  for (const auto& p : spec.friction_pairs) pairs.push_back({{"a", p.a}, {"b", p.b}, {"mu", p.mu}});
  j["friction"] = {{"default", spec.default_friction}, {"pairs", pairs}};
  return j;
}

SystemModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model file '" + path + "': " + e.what());
  }
  return SystemModel(model_spec_from_json(j));
}

}  // namespace cimpc
