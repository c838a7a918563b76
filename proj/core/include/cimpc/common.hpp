#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cimpc {

using Eigen::Isometry3d;
using Eigen::Matrix3d;
using Eigen::Matrix3Xd;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::VectorXd;

using Matrix36d = Eigen::Matrix<double, 3, 6>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes disagree with the model.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid model, scenario or parameter values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unsupported or degenerate geometry query.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// A numerical solver failed to reach its exit criterion.
class SolverError : public Error {
 public:
  using Error::Error;
};

inline void require_size(Eigen::Index actual, Eigen::Index expected,
                         const char* what) {
  if (actual != expected) {
    throw DimensionError(std::string(what) + ": expected size " +
                         std::to_string(expected) + ", got " +
                         std::to_string(actual));
  }
}

inline Matrix3d skew(const Vector3d& v) {
  Matrix3d s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

}  // namespace cimpc
