#pragma once

#include "cimpc/common.hpp"
#include "cimpc/model.hpp"

namespace cimpc {

/// Result of a signed-distance query between shapes a and b.
///
/// Every supported pair reduces to two "core" points (sphere centers, the
/// closest point of a capsule segment, or the projection onto a plane), so
/// that phi = |core_a - core_b| - r_a - r_b and the witnesses sit on the two
/// surfaces along the normal.
struct Proximity {
  double phi = 0.0;
  Vector3d witness_a = Vector3d::Zero();
  Vector3d witness_b = Vector3d::Zero();
  Vector3d normal = Vector3d::UnitZ();  // unit, points from b toward a
  Vector3d core_a = Vector3d::Zero();
  Vector3d core_b = Vector3d::Zero();
  // Segment parameter of a capsule core point; -1 when the shape is not a capsule.
  double t_a = -1.0;
  double t_b = -1.0;
  // True when the capsule parameter is strictly inside (0, 1) and moves with q.
  bool t_a_free = false;
  bool t_b_free = false;
};

Shape transform_shape(const Shape& shape, const Isometry3d& pose);

/// World-space query. Supported pairs: sphere-sphere, sphere-capsule (either
/// order), sphere-half-space and capsule-half-space (half-space as b).
Proximity signed_distance(const Shape& a, const Shape& b);

Proximity signed_distance(const Shape& a, const Isometry3d& pose_a, const Shape& b,
                          const Isometry3d& pose_b);

bool is_supported_pair(const Shape& a, const Shape& b);

}  // namespace cimpc
