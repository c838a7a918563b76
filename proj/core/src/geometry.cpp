#include "cimpc/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace cimpc {

namespace {

constexpr double kCoincidentTol = 1e-12;

struct SegmentPoint {
  Vector3d point;
  double t;
  bool free;
};

SegmentPoint closest_on_segment(const Vector3d& p0, const Vector3d& p1, const Vector3d& x) {
  const Vector3d e = p1 - p0;
  const double ee = e.squaredNorm();
  if (ee < 1e-24) return {p0, 0.0, false};
  const double t_raw = (x - p0).dot(e) / ee;
  if (t_raw <= 0.0) return {p0, 0.0, false};
  if (t_raw >= 1.0) return {p1, 1.0, false};
  return {p0 + t_raw * e, t_raw, true};
}

Proximity point_pair(const Vector3d& ca, double ra, const Vector3d& cb, double rb) {
  const Vector3d d = ca - cb;
  const double dist = d.norm();
  if (dist < kCoincidentTol) {
    throw GeometryError("signed_distance: coincident core points, normal undefined");
  }
  Proximity p;
  p.normal = d / dist;
  p.phi = dist - ra - rb;
  p.core_a = ca;
  p.core_b = cb;
  p.witness_a = ca - ra * p.normal;
  p.witness_b = cb + rb * p.normal;
  return p;
}

Proximity point_plane(const Vector3d& ca, double ra, const HalfSpace& hs) {
  Proximity p;
  const double height = hs.normal.dot(ca - hs.point);
  p.normal = hs.normal;
  p.phi = height - ra;
  p.core_a = ca;
  p.core_b = ca - height * hs.normal;
  p.witness_a = ca - ra * hs.normal;
  p.witness_b = p.core_b;
  return p;
}

}  // namespace

Shape transform_shape(const Shape& shape, const Isometry3d& pose) {
  return std::visit(
      [&](const auto& s) -> Shape {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return Sphere{pose * s.center, s.radius};
        } else if constexpr (std::is_same_v<T, Capsule>) {
          return Capsule{pose * s.p0, pose * s.p1, s.radius};
        } else {
          return HalfSpace{pose * s.point, pose.linear() * s.normal};
        }
      },
      shape);
}

bool is_supported_pair(const Shape& a, const Shape& b) {
  if (std::holds_alternative<HalfSpace>(a)) return false;
  if (std::holds_alternative<Capsule>(a) && std::holds_alternative<Capsule>(b)) return false;
  return true;
}

Proximity signed_distance(const Shape& a, const Shape& b) {
  if (const auto* sa = std::get_if<Sphere>(&a)) {
    if (const auto* sb = std::get_if<Sphere>(&b)) {
      return point_pair(sa->center, sa->radius, sb->center, sb->radius);
    }
    if (const auto* cb = std::get_if<Capsule>(&b)) {
      const auto sp = closest_on_segment(cb->p0, cb->p1, sa->center);
      auto p = point_pair(sa->center, sa->radius, sp.point, cb->radius);
      p.t_b = sp.t;
      p.t_b_free = sp.free;
      return p;
    }
    return point_plane(sa->center, sa->radius, std::get<HalfSpace>(b));
  }
  if (const auto* ca = std::get_if<Capsule>(&a)) {
    if (const auto* sb = std::get_if<Sphere>(&b)) {
      const auto sp = closest_on_segment(ca->p0, ca->p1, sb->center);
      auto p = point_pair(sp.point, ca->radius, sb->center, sb->radius);
      p.t_a = sp.t;
      p.t_a_free = sp.free;
      return p;
    }
    if (const auto* hb = std::get_if<HalfSpace>(&b)) {
      const double h0 = hb->normal.dot(ca->p0 - hb->point);
      const double h1 = hb->normal.dot(ca->p1 - hb->point);
      double t = 0.5;
      if (std::abs(h0 - h1) > 1e-12 * std::max(1.0, std::abs(h0) + std::abs(h1))) {
        t = h0 < h1 ? 0.0 : 1.0;
      }
      auto p = point_plane(ca->p0 + t * (ca->p1 - ca->p0), ca->radius, *hb);
      p.t_a = t;
      p.t_a_free = false;
      return p;
    }
  }
  throw GeometryError("signed_distance: unsupported geometry pair");
}

Proximity signed_distance(const Shape& a, const Isometry3d& pose_a, const Shape& b,
                          const Isometry3d& pose_b) {
  return signed_distance(transform_shape(a, pose_a), transform_shape(b, pose_b));
}

}  // namespace cimpc
