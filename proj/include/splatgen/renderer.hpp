// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <optional>
#include <thread>
#include <vector>

#include "splatgen/camera.hpp"
#include "splatgen/gaussian_set.hpp"
#include "splatgen/image.hpp"

namespace splatgen {

/// 2D covariance regularizer added to the diagonal (px^2).
inline constexpr double kCov2dEps = 0.3;
/// Per-splat contributions below this are skipped; also fixes the raster
/// footprint so that pixels outside the bounding box are exactly the skipped
/// ones (no discontinuity at the box edge).
inline constexpr double kOpacityCutoff = 1e-5;
/// Compositing stops once transmittance drops below this.
inline constexpr double kTransmittanceFloor = 1e-4;
/// Per-splat compositing weight cap.
inline constexpr double kMaxBlendWeight = 0.99;

struct ProjectedGaussian {
  Vec2 mean2d;
  Mat2 cov2d;
  double depth = 0.0;
};

struct RenderedImage {
  Image pixels;                       // H x W x 3 in [0, 1]
  std::vector<double> transmittance;  // H x W in [0, 1]
};

namespace detail {

/// EWA projection of one primitive; no image-bounds culling.
struct CamSpaceSplat {
  Vec3 x_cam;        // camera-frame center
  Vec2 mean2d;
  Mat2 cov2d;        // regularized
  Mat2 conic;        // cov2d^-1
  double q_cutoff;   // pixel skipped when (p-mean)' conic (p-mean) >= q_cutoff
  double alpha;
  int x0, x1, y0, y1;  // inclusive raster bounds, clipped to the image
  std::size_t index;
};

inline Mat2 project_cov(const Mat3& cov_cam, const Vec3& t, double fx, double fy) {
  const double iz = 1.0 / t.z();
  const double iz2 = iz * iz;
  Eigen::Matrix<double, 2, 3> j;
  j << fx * iz, 0.0, -fx * t.x() * iz2, 0.0, fy * iz, -fy * t.y() * iz2;
  Mat2 c = j * cov_cam * j.transpose();
  c(0, 0) += kCov2dEps;
  c(1, 1) += kCov2dEps;
  return c;
}

/// Computes raster data for one splat, or nullopt when it cannot contribute.
inline std::optional<CamSpaceSplat> make_raster_splat(const Vec3& position, const Mat3& cov_world,
                                                      double alpha, const CameraModel& cam,
                                                      std::size_t index) {
  const Mat3 r = cam.world_to_camera.rotation_matrix();
  const Vec3 t = r * position + cam.world_to_camera.translation;
  if (!(t.z() > cam.near && t.z() < cam.far)) return std::nullopt;
  if (alpha <= kOpacityCutoff) return std::nullopt;
  CamSpaceSplat s;
  s.x_cam = t;
  s.mean2d = Vec2(cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy);
  s.cov2d = project_cov(r * cov_world * r.transpose(), t, cam.fx, cam.fy);
  const double det = s.cov2d.determinant();
  if (!(det > 0) || !s.cov2d.allFinite()) return std::nullopt;
  s.conic = s.cov2d.inverse();
  s.alpha = alpha;
  s.q_cutoff = 2.0 * std::log(alpha / kOpacityCutoff);
  const double rx = std::sqrt(s.q_cutoff * s.cov2d(0, 0));
  const double ry = std::sqrt(s.q_cutoff * s.cov2d(1, 1));
  s.x0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.x() - rx)));
  s.x1 = std::min(cam.width - 1, static_cast<int>(std::floor(s.mean2d.x() + rx)));
  s.y0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.y() - ry)));
  s.y1 = std::min(cam.height - 1, static_cast<int>(std::floor(s.mean2d.y() + ry)));
  if (s.x0 > s.x1 || s.y0 > s.y1) return std::nullopt;
  s.index = index;
  return s;
}

/// Projects all splats and returns them sorted front-to-back (depth, then
/// input index on exact ties).
inline std::vector<CamSpaceSplat> project_sorted(const GaussianSet& set, const CameraModel& cam) {
  std::vector<CamSpaceSplat> splats;
  splats.reserve(set.count());
  for (std::size_t i = 0; i < set.count(); ++i) {
    const Mat3 cov = covariance_of(set.rotations()[i], set.scales()[i]);
    if (auto s = make_raster_splat(set.positions()[i], cov, set.opacities()[i], cam, i))
      splats.push_back(*s);
  }
  std::sort(splats.begin(), splats.end(), [](const CamSpaceSplat& a, const CamSpaceSplat& b) {
    if (a.x_cam.z() != b.x_cam.z()) return a.x_cam.z() < b.x_cam.z();
    return a.index < b.index;
  });
  return splats;
}

/// Composites one tile. Per-pixel arithmetic order is the global depth order,
/// independent of the tiling, so tiled and whole-image runs are bit-equal.
/// `colors` may be null for mask-only rendering.
inline void composite_tile(const std::vector<CamSpaceSplat>& splats, const Vec3* colors,
                           int tx0, int tx1, int ty0, int ty1, int image_width,
                           const Vec3& background, double* out_rgb, double* out_t) {
  for (int y = ty0; y <= ty1; ++y)
    for (int x = tx0; x <= tx1; ++x) out_t[y * image_width + x] = 1.0;

  for (const CamSpaceSplat& s : splats) {
    const int x0 = std::max(s.x0, tx0), x1 = std::min(s.x1, tx1);
    const int y0 = std::max(s.y0, ty0), y1 = std::min(s.y1, ty1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        double& t = out_t[y * image_width + x];
        if (t < kTransmittanceFloor) continue;
        const double dx = x - s.mean2d.x();
        const double dy = y - s.mean2d.y();
        const double m = s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy +
                         s.conic(1, 1) * dy * dy;
        if (m >= s.q_cutoff || m < 0.0) continue;
        const double o = std::min(kMaxBlendWeight, s.alpha * std::exp(-0.5 * m));
        if (out_rgb) {
          const Vec3& c = colors[s.index];
          double* px = out_rgb + (y * static_cast<std::size_t>(image_width) + x) * 3;
          px[0] += t * o * c.x();
          px[1] += t * o * c.y();
          px[2] += t * o * c.z();
        }
        t *= 1.0 - o;
      }
    }
  }

  if (out_rgb) {
    for (int y = ty0; y <= ty1; ++y)
      for (int x = tx0; x <= tx1; ++x) {
        const double t = out_t[y * image_width + x];
        double* px = out_rgb + (y * static_cast<std::size_t>(image_width) + x) * 3;
        for (int c = 0; c < 3; ++c)
          px[c] = std::clamp(px[c] + t * background[c], 0.0, 1.0);
      }
  }
}

/// View-dependent color of each splat along camera-center -> splat-center.
inline std::vector<Vec3> splat_colors(const GaussianSet& set, const CameraModel& cam) {
  const Vec3 eye = cam.center();
  std::vector<Vec3> colors(set.count());
  for (std::size_t i = 0; i < set.count(); ++i) {
    Vec3 dir = set.positions()[i] - eye;
    const double n = dir.norm();
    dir = n > 0 ? Vec3(dir / n) : Vec3(0, 0, 1);
    colors[i] = evaluate_sh(set.sh_degree(), set.sh_ptr(i), dir);
  }
  return colors;
}

}  // namespace detail

/// Projects one primitive to the image plane. Culled (nullopt) when the depth
/// is outside (near, far) or the footprint misses the image.
inline std::optional<ProjectedGaussian> project_gaussian(const Gaussian& g,
                                                         const CameraModel& cam) {
  cam.validate();
  const Mat3 cov = covariance_of(g.rotation, g.scale);
  const Mat3 r = cam.world_to_camera.rotation_matrix();
  const Vec3 t = r * g.position + cam.world_to_camera.translation;
  if (!(t.z() > cam.near && t.z() < cam.far)) return std::nullopt;
  ProjectedGaussian out;
  out.mean2d = Vec2(cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy);
  out.cov2d = detail::project_cov(r * cov * r.transpose(), t, cam.fx, cam.fy);
  out.depth = t.z();
  // 3-sigma footprint test against the image rectangle.
  const double rx = 3.0 * std::sqrt(out.cov2d(0, 0));
  const double ry = 3.0 * std::sqrt(out.cov2d(1, 1));
  if (out.mean2d.x() + rx < 0 || out.mean2d.x() - rx > cam.width - 1 ||
      out.mean2d.y() + ry < 0 || out.mean2d.y() - ry > cam.height - 1)
    return std::nullopt;
  return out;
}

/// Front-to-back alpha compositing over `background`. Pixels are sampled at
/// integer coordinates; SH color is evaluated once per splat.
inline RenderedImage render(const GaussianSet& set, const CameraModel& cam,
                            const Vec3& background) {
  cam.validate();
  RenderedImage out;
  out.pixels = Image(cam.width, cam.height, 3);
  out.transmittance.assign(static_cast<std::size_t>(cam.width) * cam.height, 1.0);
  const auto splats = detail::project_sorted(set, cam);
  const auto colors = detail::splat_colors(set, cam);
  detail::composite_tile(splats, colors.data(), 0, cam.width - 1, 0, cam.height - 1, cam.width,
                         background, out.pixels.data.data(), out.transmittance.data());
  return out;
}

/// Tiled variant; per-pixel results are bit-identical to `render`.
inline RenderedImage render_tiled(const GaussianSet& set, const CameraModel& cam,
                                  const Vec3& background, int tile_size, int n_threads) {
  cam.validate();
  if (tile_size < 1) throw InvalidArgument("render_tiled: tile_size must be >= 1");
  RenderedImage out;
  out.pixels = Image(cam.width, cam.height, 3);
  out.transmittance.assign(static_cast<std::size_t>(cam.width) * cam.height, 1.0);
  const auto splats = detail::project_sorted(set, cam);
  const auto colors = detail::splat_colors(set, cam);

  struct Tile {
    int x0, x1, y0, y1;
  };
  std::vector<Tile> tiles;
  for (int y = 0; y < cam.height; y += tile_size)
    for (int x = 0; x < cam.width; x += tile_size)
      tiles.push_back({x, std::min(x + tile_size - 1, cam.width - 1), y,
                       std::min(y + tile_size - 1, cam.height - 1)});

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= tiles.size()) return;
      const Tile& t = tiles[k];
      detail::composite_tile(splats, colors.data(), t.x0, t.x1, t.y0, t.y1, cam.width,
                             background, out.pixels.data.data(), out.transmittance.data());
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < std::max(1, n_threads) - 1; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();
  return out;
}

/// Soft robot mask: per-pixel accumulated opacity 1 - prod(1 - o_j).
inline Image render_mask(const GaussianSet& set, const CameraModel& cam) {
  cam.validate();
  std::vector<double> t(static_cast<std::size_t>(cam.width) * cam.height, 1.0);
  const auto splats = detail::project_sorted(set, cam);
  detail::composite_tile(splats, nullptr, 0, cam.width - 1, 0, cam.height - 1, cam.width,
                         Vec3::Zero(), nullptr, t.data());
  Image mask(cam.width, cam.height, 1);
  for (std::size_t i = 0; i < t.size(); ++i) mask.data[i] = 1.0 - t[i];
  return mask;
}

}  // namespace splatgen
