// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Geometry>

#include <cmath>
#include <vector>

#include "splatgen/errors.hpp"
#include "splatgen/kdtree.hpp"
#include "splatgen/transforms.hpp"

namespace splatgen {

namespace detail {

inline void check_cloud_rank(const std::vector<Vec3>& pts, const char* which) {
  if (pts.size() < 3)
    throw DegenerateGeometry(std::string("icp_register: ") + which + " cloud needs >= 3 points");
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : pts) cov += (p - mean) * (p - mean).transpose();
  const Eigen::JacobiSVD<Mat3> svd(cov);
  const double s0 = svd.singularValues()[0];
  // Collinear or coincident points leave no usable rotation constraint.
  if (s0 <= 0.0 || svd.singularValues()[1] <= 1e-12 * s0)
    throw DegenerateGeometry(std::string("icp_register: ") + which +
                             " cloud is collinear (covariance rank < 2)");
}

}  // namespace detail

/// Point-to-point ICP with per-iteration closed-form similarity estimation
/// (Umeyama). Correspondences are exact nearest neighbors in `target`.
/// Stops when the RMS residual changes by less than 1e-7 or after
/// `max_iterations`.
inline SimilarityTransform icp_register(const std::vector<Vec3>& source,
                                        const std::vector<Vec3>& target,
                                        const SimilarityTransform& init,
                                        int max_iterations = 100) {
  detail::check_cloud_rank(source, "source");
  detail::check_cloud_rank(target, "target");

  const KdTree tree(target);
  Eigen::Matrix3Xd src(3, source.size());
  for (std::size_t i = 0; i < source.size(); ++i) src.col(i) = source[i];

  SimilarityTransform t = init;
  double prev_rms = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iterations; ++iter) {
    Eigen::Matrix3Xd dst(3, source.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      const Vec3 p = t.apply(source[i]);
      const KdTree::Hit hit = tree.nearest(p);
      dst.col(i) = target[hit.index];
      sq += hit.squared_distance;
    }
    const double rms = std::sqrt(sq / static_cast<double>(source.size()));
    if (std::abs(prev_rms - rms) < 1e-7) break;
    prev_rms = rms;

    const Eigen::Matrix4d m = Eigen::umeyama(src, dst, true);
    const Mat3 sr = m.block<3, 3>(0, 0);
    const double scale = std::cbrt(sr.determinant());
    if (!(scale > 0) || !std::isfinite(scale))
      throw DegenerateGeometry("icp_register: similarity estimation collapsed");
    t.rotation = Quat(Mat3(sr / scale)).normalized();
    t.translation = m.block<3, 1>(0, 3);
    t.scale = scale;
  }
  return t;
}

}  // namespace splatgen
