// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "splatgen/camera.hpp"
#include "splatgen/icp.hpp"
#include "splatgen/kinematics.hpp"
#include "splatgen/optimizer.hpp"
#include "splatgen/render_grad.hpp"
#include "splatgen/renderer.hpp"

namespace splatgen {

struct AlignmentResult {
  SimilarityTransform transform;
  double final_loss = 0.0;
  int iterations = 0;
  int view_count = 0;
  bool diverged = false;
  std::vector<double> per_view_loss;
};

struct AlignmentOptions {
  int views = 4;
  int resolution = 256;
  int dilation_px = 2;
  double elevation = 30.0 * std::numbers::pi / 180.0;
  double radius_factor = 1.5;
  DescentSchedule schedule;
};

/// Four canonical views at azimuths {0, 90, 180, 270} deg, 30 deg elevation,
/// targeting the robot base from ~1.5x the robot's bounding radius.
inline std::vector<CameraModel> canonical_views(const KinematicChain& chain, const VecX& q,
                                                const LinkPointClouds& clouds,
                                                const AlignmentOptions& opts = {}) {
  const auto world = link_points_world(chain, q, clouds);
  double bound = 0.0;
  for (const auto& [name, pts] : world)
    for (const Vec3& p : pts) bound = std::max(bound, p.norm());
  if (bound <= 0.0)
    throw InvalidArgument("canonical_views: clouds are empty, cannot frame the robot");
  const double radius = opts.radius_factor * bound;

  std::vector<CameraModel> cams;
  for (int k = 0; k < opts.views; ++k) {
    const double az = 2.0 * std::numbers::pi * k / opts.views;
    const Vec3 eye = radius * Vec3(std::cos(opts.elevation) * std::cos(az),
                                   std::cos(opts.elevation) * std::sin(az),
                                   std::sin(opts.elevation));
    CameraModel cam;
    cam.width = cam.height = opts.resolution;
    cam.fx = cam.fy = 0.7 * opts.resolution;
    cam.cx = cam.cy = opts.resolution / 2.0;
    cam.world_to_camera = CameraModel::look_at(eye, Vec3::Zero(), Vec3::UnitZ());
    cams.push_back(cam);
  }
  return cams;
}

/// Binary reference mask: every link point is projected and stamped as a
/// filled disc of radius `dilation_px`.
inline Image render_reference_mask(const KinematicChain& chain, const VecX& q,
                                   const LinkPointClouds& clouds, const CameraModel& cam,
                                   int dilation_px) {
  cam.validate();
  Image mask(cam.width, cam.height, 1);
  const auto world = link_points_world(chain, q, clouds);
  const Mat3 r = cam.world_to_camera.rotation_matrix();
  const double rad2 = static_cast<double>(dilation_px) * dilation_px;
  for (const auto& [name, pts] : world) {
    for (const Vec3& p : pts) {
      const Vec3 t = r * p + cam.world_to_camera.translation;
      if (!(t.z() > cam.near && t.z() < cam.far)) continue;
      const double px = cam.fx * t.x() / t.z() + cam.cx;
      const double py = cam.fy * t.y() / t.z() + cam.cy;
      const int x0 = std::max(0, static_cast<int>(std::floor(px - dilation_px)));
      const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(px + dilation_px)));
      const int y0 = std::max(0, static_cast<int>(std::floor(py - dilation_px)));
      const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(py + dilation_px)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
          if ((x - px) * (x - px) + (y - py) * (y - py) <= rad2) mask.at(y, x) = 1.0;
    }
  }
  return mask;
}

/// Gradient-based refinement of the scene-to-base similarity transform
/// against URDF reference masks at q_default. Returns the best iterate.
inline AlignmentResult refine_alignment(const GaussianSet& robot_set, const KinematicChain& chain,
                                        const LinkPointClouds& clouds,
                                        const std::vector<CameraModel>& cams,
                                        const SimilarityTransform& init,
                                        const AlignmentOptions& opts = {}) {
  if (cams.empty()) throw InvalidArgument("refine_alignment: need at least one view");
  std::vector<Image> targets;
  targets.reserve(cams.size());
  for (const CameraModel& cam : cams)
    targets.push_back(render_reference_mask(chain, chain.q_default(), clouds, cam,
                                            opts.dilation_px));

  const DescentSchedule& sched = opts.schedule;
  Adam<7> adam(sched.rate);
  SimilarityTransform params = init;
  AlignmentResult result;
  result.view_count = static_cast<int>(cams.size());

  MaskLossResult eval = grad_mask_loss(robot_set, params, cams, targets);
  double best_loss = eval.loss;
  const double init_loss = eval.loss;
  SimilarityTransform best = params;
  bool improved_early = false;
  // Early stop on the best loss improving by less than min_improvement over
  // a `patience`-step window.
  std::vector<double> best_history{best_loss};
  int step = 0;
  for (; step < sched.max_steps; ++step) {
    adam.set_rate(sched.rate * std::pow(sched.decay_factor, step / sched.decay_every));
    const Vec7 delta = adam.step(eval.gradient);
    params.translation -= delta.head<3>();
    params.rotation = (quat_from_rotvec(-delta.segment<3>(3)) * params.rotation).normalized();
    params.scale *= std::exp(-delta[6]);

    eval = grad_mask_loss(robot_set, params, cams, targets);
    if (eval.loss < best_loss) {
      best_loss = eval.loss;
      best = params;
      if (step < 50 && eval.loss < init_loss - sched.min_improvement) improved_early = true;
    }
    best_history.push_back(best_loss);
    if (step + 1 >= sched.patience &&
        best_history[best_history.size() - 1 - sched.patience] - best_loss <
            sched.min_improvement)
      break;
  }
  // Advisory flag: no improvement during the first 50 steps of a non-trivial
  // optimization.
  result.diverged = !improved_early && init_loss > 1e-8;
  result.transform = best;
  result.iterations = step;

  const GaussianSet aligned = apply_similarity(robot_set, best);
  result.per_view_loss.clear();
  for (std::size_t v = 0; v < cams.size(); ++v) {
    const Image got = render_mask(aligned, cams[v]);
    double acc = 0.0;
    for (std::size_t p = 0; p < got.data.size(); ++p) {
      const double d = got.data[p] - targets[v].data[p];
      acc += d * d;
    }
    result.per_view_loss.push_back(acc / static_cast<double>(got.data.size()));
  }
  result.final_loss = grad_mask_loss(robot_set, best, cams, targets).loss;
  return result;
}

/// Recovers a deployed camera pose by minimizing (1 - SSIM)^2 against one
/// expert frame, starting from a coarse initial pose. Intrinsics stay fixed.
inline CameraModel estimate_camera(const GaussianSet& scene_set, const Image& expert_frame,
                                   const CameraModel& init, double loss_threshold = 5e-4,
                                   const DescentSchedule& sched = {},
                                   const Vec3& background = Vec3::Zero()) {
  init.validate();
  if (expert_frame.width != init.width || expert_frame.height != init.height)
    throw InvalidArgument("estimate_camera: frame dimensions must match the camera");

  Adam<6> adam(sched.rate);
  CameraModel cam = init;
  auto eval = [&](const CameraModel& c) { return grad_camera_loss(scene_set, c, expert_frame); };
  CameraLossResult r = eval(cam);
  double best_loss = r.loss;
  CameraModel best = cam;
  std::vector<double> best_history{best_loss};
  for (int step = 0; step < sched.max_steps; ++step) {
    if (best_loss < 1e-12) break;
    adam.set_rate(sched.rate * std::pow(sched.decay_factor, step / sched.decay_every));
    const Vec6 delta = adam.step(r.gradient);
    cam.world_to_camera.translation -= delta.head<3>();
    cam.world_to_camera.rotation =
        (quat_from_rotvec(-delta.tail<3>()) * cam.world_to_camera.rotation).normalized();
    r = eval(cam);
    if (r.loss < best_loss) {
      best_loss = r.loss;
      best = cam;
    }
    best_history.push_back(best_loss);
    if (step + 1 >= sched.patience &&
        best_history[best_history.size() - 1 - sched.patience] - best_loss <
            sched.min_improvement)
      break;
  }
  if (best_loss > loss_threshold)
    throw PoseEstimationFailed("estimate_camera: residual loss above threshold", best_loss);
  return best;
}

}  // namespace splatgen
