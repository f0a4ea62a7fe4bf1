// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "splatgen/renderer.hpp"
#include "splatgen/ssim.hpp"
#include "splatgen/transforms.hpp"

namespace splatgen {

struct MaskLossResult {
  double loss = 0.0;
  // d loss / d (translation xyz, rotation so(3) xyz, log-scale).
  Vec7 gradient = Vec7::Zero();
};

struct CameraLossResult {
  double loss = 0.0;
  // d loss / d (translation xyz, rotation so(3) xyz) of the extrinsics.
  Vec6 gradient = Vec6::Zero();
};

namespace detail {

/// Raster data of one transformed splat plus the forward derivatives of its
/// screen-space mean and covariance with respect to the 7 transform
/// parameters, evaluated at the current estimate (local rotation = 0).
struct SplatWithJacobians {
  CamSpaceSplat raster;
  Vec2 d_mean2d[7];
  Mat2 d_cov2d[7];
};

inline std::vector<SplatWithJacobians> project_with_jacobians(const GaussianSet& set,
                                                              const SimilarityTransform& params,
                                                              const CameraModel& cam) {
  const Mat3 r_est = params.rotation.toRotationMatrix();
  const Mat3 r_cw = cam.world_to_camera.rotation_matrix();
  const double sigma = params.scale;

  std::vector<SplatWithJacobians> out;
  out.reserve(set.count());
  for (std::size_t i = 0; i < set.count(); ++i) {
    const Vec3 a = r_est * (sigma * set.positions()[i]);
    const Vec3 mu = a + params.translation;
    const Mat3 b = r_est * set.rotations()[i].toRotationMatrix() *
                   set.scales()[i].asDiagonal();
    const Mat3 cov_world = (sigma * sigma) * (b * b.transpose());

    auto raster = make_raster_splat(mu, cov_world, set.opacities()[i], cam, i);
    if (!raster) continue;
    SplatWithJacobians s;
    s.raster = *raster;

    const Vec3& t = s.raster.x_cam;
    const double iz = 1.0 / t.z();
    const double iz2 = iz * iz;
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx * iz, 0.0, -cam.fx * t.x() * iz2, 0.0, cam.fy * iz, -cam.fy * t.y() * iz2;
    const Mat3 cov_cam = r_cw * cov_world * r_cw.transpose();

    for (int k = 0; k < 7; ++k) {
      Vec3 d_xcam;
      Mat3 d_cov_cam = Mat3::Zero();
      if (k < 3) {
        d_xcam = r_cw.col(k);
      } else if (k < 6) {
        const Vec3 e = Vec3::Unit(k - 3);
        d_xcam = r_cw * e.cross(a);
        const Mat3 ex = skew(e);
        d_cov_cam = r_cw * (ex * cov_world - cov_world * ex) * r_cw.transpose();
      } else {
        d_xcam = r_cw * a;
        d_cov_cam = 2.0 * cov_cam;
      }
      s.d_mean2d[k] = j * d_xcam;

      Eigen::Matrix<double, 2, 3> d_j = Eigen::Matrix<double, 2, 3>::Zero();
      d_j(0, 2) += -cam.fx * iz2 * d_xcam.x();
      d_j(1, 2) += -cam.fy * iz2 * d_xcam.y();
      d_j(0, 0) += -cam.fx * iz2 * d_xcam.z();
      d_j(1, 1) += -cam.fy * iz2 * d_xcam.z();
      d_j(0, 2) += 2.0 * cam.fx * t.x() * iz2 * iz * d_xcam.z();
      d_j(1, 2) += 2.0 * cam.fy * t.y() * iz2 * iz * d_xcam.z();

      const Mat2 mixed = d_j * cov_cam * j.transpose();
      s.d_cov2d[k] = mixed + mixed.transpose() + j * d_cov_cam * j.transpose();
    }
    out.push_back(s);
  }
  std::sort(out.begin(), out.end(), [](const SplatWithJacobians& a, const SplatWithJacobians& b) {
    if (a.raster.x_cam.z() != b.raster.x_cam.z()) return a.raster.x_cam.z() < b.raster.x_cam.z();
    return a.raster.index < b.raster.index;
  });
  return out;
}

}  // namespace detail

/// Mean-over-views MSE between the soft mask of the transformed set and the
/// target masks, with the analytic gradient in (translation, so(3) rotation,
/// log-scale) coordinates, backpropagated through projection and compositing.
inline MaskLossResult grad_mask_loss(const GaussianSet& set, const SimilarityTransform& params,
                                     const std::vector<CameraModel>& cams,
                                     const std::vector<Image>& targets) {
  if (cams.empty()) throw InvalidArgument("grad_mask_loss: need at least one view");
  if (cams.size() != targets.size())
    throw InvalidArgument("grad_mask_loss: cams and targets must have the same length");

  MaskLossResult result;
  const double inv_views = 1.0 / static_cast<double>(cams.size());

  for (std::size_t v = 0; v < cams.size(); ++v) {
    const CameraModel& cam = cams[v];
    cam.validate();
    const Image& target = targets[v];
    if (target.width != cam.width || target.height != cam.height || target.channels != 1)
      throw InvalidArgument("grad_mask_loss: target mask dimensions must match the camera");

    auto splats = detail::project_with_jacobians(set, params, cam);

    const std::size_t npix = static_cast<std::size_t>(cam.width) * cam.height;
    std::vector<double> tfinal(npix, 1.0);
    for (const auto& s : splats) {
      const auto& r = s.raster;
      for (int y = r.y0; y <= r.y1; ++y)
        for (int x = r.x0; x <= r.x1; ++x) {
          double& t = tfinal[y * cam.width + x];
          if (t < kTransmittanceFloor) continue;
          const double dx = x - r.mean2d.x(), dy = y - r.mean2d.y();
          const double m =
              r.conic(0, 0) * dx * dx + 2.0 * r.conic(0, 1) * dx * dy + r.conic(1, 1) * dy * dy;
          if (m >= r.q_cutoff || m < 0.0) continue;
          t *= 1.0 - std::min(kMaxBlendWeight, r.alpha * std::exp(-0.5 * m));
        }
    }

    double view_loss = 0.0;
    for (std::size_t p = 0; p < npix; ++p) {
      const double diff = (1.0 - tfinal[p]) - target.data[p];
      view_loss += diff * diff;
    }
    view_loss /= static_cast<double>(npix);
    result.loss += inv_views * view_loss;

    // Backward: per-splat accumulators for d loss / d mean2d and the
    // quadratic-form moment K = sum v_m * delta delta^T.
    std::vector<Vec2> v_mean(splats.size(), Vec2::Zero());
    std::vector<Mat2> kmoment(splats.size(), Mat2::Zero());
    const double pixel_w = 2.0 * inv_views / static_cast<double>(npix);

    std::vector<double> trun(npix, 1.0);
    for (std::size_t si = 0; si < splats.size(); ++si) {
      const auto& r = splats[si].raster;
      for (int y = r.y0; y <= r.y1; ++y)
        for (int x = r.x0; x <= r.x1; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
          double& t = trun[p];
          if (t < kTransmittanceFloor) continue;
          const double dx = x - r.mean2d.x(), dy = y - r.mean2d.y();
          const double m =
              r.conic(0, 0) * dx * dx + 2.0 * r.conic(0, 1) * dx * dy + r.conic(1, 1) * dy * dy;
          if (m >= r.q_cutoff || m < 0.0) continue;
          const double g = r.alpha * std::exp(-0.5 * m);
          const double o = std::min(kMaxBlendWeight, g);
          const double v_img = pixel_w * ((1.0 - tfinal[p]) - target.data[p]);
          const double v_o = v_img * tfinal[p] / (1.0 - o);
          if (g < kMaxBlendWeight) {
            const double v_m = -0.5 * g * v_o;
            const Vec2 delta(dx, dy);
            const Vec2 cd = r.conic * delta;
            v_mean[si] += -2.0 * v_m * cd;
            kmoment[si] += v_m * (delta * delta.transpose());
          }
          t *= 1.0 - o;
        }
    }

    for (std::size_t si = 0; si < splats.size(); ++si) {
      const auto& s = splats[si];
      const Mat2 v_cov = -s.raster.conic * kmoment[si] * s.raster.conic;
      for (int k = 0; k < 7; ++k)
        result.gradient[k] +=
            v_mean[si].dot(s.d_mean2d[k]) + (v_cov.array() * s.d_cov2d[k].array()).sum();
    }
  }
  return result;
}

/// (1 - SSIM)^2 photometric loss between the target frame and a render from
/// `cam`, with the extrinsic gradient by central finite differences.
inline CameraLossResult grad_camera_loss(const GaussianSet& set, const CameraModel& cam,
                                         const Image& target, double fd_step = 1e-4) {
  cam.validate();
  if (target.width != cam.width || target.height != cam.height)
    throw InvalidArgument("grad_camera_loss: target dimensions must match the camera");

  const auto eval = [&](const CameraModel& c) {
    const double s = ssim(target, render(set, c, Vec3::Zero()).pixels);
    return (1.0 - s) * (1.0 - s);
  };

  CameraLossResult result;
  result.loss = eval(cam);
  for (int k = 0; k < 6; ++k) {
    CameraModel plus = cam, minus = cam;
    if (k < 3) {
      plus.world_to_camera.translation[k] += fd_step;
      minus.world_to_camera.translation[k] -= fd_step;
    } else {
      const Vec3 w = fd_step * Vec3::Unit(k - 3);
      plus.world_to_camera.rotation = (quat_from_rotvec(w) * cam.world_to_camera.rotation).normalized();
      minus.world_to_camera.rotation =
          (quat_from_rotvec(-w) * cam.world_to_camera.rotation).normalized();
    }
    result.gradient[k] = (eval(plus) - eval(minus)) / (2.0 * fd_step);
  }
  return result;
}

}  // namespace splatgen
