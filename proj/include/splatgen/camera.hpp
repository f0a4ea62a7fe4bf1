// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatgen/errors.hpp"
#include "splatgen/transforms.hpp"

namespace splatgen {

/// Pinhole camera: +x right, +y down, +z forward; pixels sampled at integer
/// coordinates. `world_to_camera` maps world points into the camera frame.
struct CameraModel {
  double fx = 100.0, fy = 100.0, cx = 64.0, cy = 64.0;
  int width = 128, height = 128;
  RigidTransform world_to_camera;
  double near = 0.01, far = 100.0;

  void validate() const {
    if (!(fx > 0) || !(fy > 0)) throw InvalidArgument("CameraModel: fx, fy must be positive");
    if (width < 1 || height < 1) throw InvalidArgument("CameraModel: size must be >= 1");
    if (!(0 < near && near < far)) throw InvalidArgument("CameraModel: need 0 < near < far");
  }

  Vec3 center() const { return world_to_camera.inverse().translation; }

  /// Places the camera at `eye` looking at `target`, with world `up`
  /// projecting to image-up. The ray through the principal point passes
  /// through `target` exactly.
  static RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    const Vec3 z = (target - eye).normalized();
    Vec3 x = z.cross(up);
    const double n = x.norm();
    if (n < 1e-12) throw InvalidArgument("look_at: view direction parallel to up");
    x /= n;
    const Vec3 y = z.cross(x);
    Mat3 r;
    r.row(0) = x;
    r.row(1) = y;
    r.row(2) = z;
    return {Quat(r).normalized(), -(r * eye)};
  }
};

}  // namespace splatgen
