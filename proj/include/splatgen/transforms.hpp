// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>

#include "splatgen/errors.hpp"

namespace splatgen {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Rotation vector (axis * angle) to quaternion.
inline Quat quat_from_rotvec(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z());
    return q.normalized();
  }
  return Quat(Eigen::AngleAxisd(angle, w / angle));
}

/// Quaternion to rotation vector, angle in [0, pi].
inline Vec3 rotvec_from_quat(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0) q.coeffs() *= -1.0;
  const Eigen::AngleAxisd aa(q);
  return aa.angle() * aa.axis();
}

/// Rotation + translation. Composition follows the usual convention:
/// (a * b).apply(p) == a.apply(b.apply(p)).
struct RigidTransform {
  Quat rotation{1, 0, 0, 0};
  Vec3 translation{0, 0, 0};

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  RigidTransform operator*(const RigidTransform& other) const {
    return {(rotation * other.rotation).normalized(), rotation * other.translation + translation};
  }

  RigidTransform inverse() const {
    const Quat inv = rotation.conjugate();
    return {inv, -(inv * translation)};
  }

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

  bool approx_equal(const RigidTransform& other, double tol) const {
    const double dp = (translation - other.translation).norm();
    const double dr = rotvec_from_quat(rotation.conjugate() * other.rotation).norm();
    return dp <= tol && dr <= tol;
  }
};

/// Rotation + translation + uniform scale. apply(p) = R * (s * p) + t.
struct SimilarityTransform {
  Quat rotation{1, 0, 0, 0};
  Vec3 translation{0, 0, 0};
  double scale = 1.0;

  static SimilarityTransform identity() { return {}; }

  static SimilarityTransform from_rigid(const RigidTransform& rt) {
    return {rt.rotation, rt.translation, 1.0};
  }

  RigidTransform to_rigid() const { return {rotation, translation}; }

  Vec3 apply(const Vec3& p) const { return rotation * (scale * p) + translation; }

  /// (a * b).apply(p) == a.apply(b.apply(p)).
  SimilarityTransform operator*(const SimilarityTransform& other) const {
    return {(rotation * other.rotation).normalized(),
            rotation * (scale * other.translation) + translation, scale * other.scale};
  }

  SimilarityTransform inverse() const {
    if (scale <= 0.0) throw InvalidArgument("SimilarityTransform: scale must be positive");
    const Quat inv = rotation.conjugate();
    return {inv, inv * translation * (-1.0 / scale), 1.0 / scale};
  }
};

/// Shortest-arc rotation angle between two quaternions, radians.
inline double rotation_angle_between(const Quat& a, const Quat& b) {
  return rotvec_from_quat(a.conjugate() * b).norm();
}

}  // namespace splatgen
