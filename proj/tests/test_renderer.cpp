// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "splatgen/renderer.hpp"
#include "splatgen/ssim.hpp"
#include "test_util.hpp"

namespace splatgen {
namespace {

using testutil::make_camera;
using testutil::oracle_render;
using testutil::random_scene;

Gaussian solid_gaussian(const Vec3& pos, double scale, double opacity, const Vec3& color) {
  Gaussian g;
  g.position = pos;
  g.scale = Vec3::Constant(scale);
  g.opacity = opacity;
  g.sh.resize(3);
  constexpr double kY00 = 0.28209479177387814;
  for (int c = 0; c < 3; ++c) g.sh[c] = (color[c] - 0.5) / kY00;
  return g;
}

TEST(ProjectGaussian, OnAxisProjectsToPrincipalPoint) {
  CameraModel cam = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 64, 80.0);
  Gaussian g = solid_gaussian(Vec3(0, 0, 2.0), 0.05, 0.9, Vec3(1, 0, 0));
  const auto p = project_gaussian(g, cam);
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR(p->mean2d.x(), cam.cx, 1e-9);
  EXPECT_NEAR(p->mean2d.y(), cam.cy, 1e-9);
  EXPECT_NEAR(p->depth, 2.0, 1e-9);
}

TEST(ProjectGaussian, IsotropicCovarianceMatchesFiniteDifferenceOracle) {
  CameraModel cam = make_camera(Vec3(0.2, -0.1, -0.5), Vec3(0, 0, 1), 64, 90.0);
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    Gaussian g;
    g.position = Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(0.8, 2.0));
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    g.rotation = quat_from_rotvec(axis * rng.uniform(0, 3));
    g.scale = Vec3(std::exp(rng.uniform(-4, -2)), std::exp(rng.uniform(-4, -2)),
                   std::exp(rng.uniform(-4, -2)));
    g.opacity = 0.8;
    g.sh.resize(3, 0.0);
    const auto p = project_gaussian(g, cam);
    ASSERT_TRUE(p.has_value());
    // Finite-difference Jacobian of the pixel projection at the center.
    const auto project_point = [&](const Vec3& w) {
      const Vec3 t = cam.world_to_camera.apply(w);
      return Vec2(cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy);
    };
    const double h = 1e-6;
    Eigen::Matrix<double, 2, 3> jfd;
    for (int k = 0; k < 3; ++k)
      jfd.col(k) =
          (project_point(g.position + h * Vec3::Unit(k)) - project_point(g.position - h * Vec3::Unit(k))) /
          (2 * h);
    const Mat2 expected = jfd * covariance_of(g.rotation, g.scale) * jfd.transpose() +
                          kCov2dEps * Mat2::Identity();
    EXPECT_LT((p->cov2d - expected).norm() / expected.norm(), 1e-3);
  }
  // Closed form for an isotropic splat on the optical axis.
  CameraModel axis_cam = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 64, 90.0);
  const double s = 0.03, d = 1.5;
  Gaussian iso = solid_gaussian(Vec3(0, 0, d), s, 0.9, Vec3(0.5, 0.5, 0.5));
  const auto p = project_gaussian(iso, axis_cam);
  ASSERT_TRUE(p.has_value());
  const double sigma_px = axis_cam.fx * s / d;
  EXPECT_NEAR(p->cov2d(0, 0), sigma_px * sigma_px + kCov2dEps, 1e-6);
  EXPECT_NEAR(p->cov2d(1, 1), sigma_px * sigma_px + kCov2dEps, 1e-6);
  EXPECT_NEAR(p->cov2d(0, 1), 0.0, 1e-9);
}

TEST(ProjectGaussian, BehindCameraIsCulled) {
  CameraModel cam = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 64, 80.0);
  Gaussian g = solid_gaussian(Vec3(0, 0, -1.0), 0.05, 0.9, Vec3(1, 0, 0));
  EXPECT_FALSE(project_gaussian(g, cam).has_value());
  // Far off-screen: footprint misses the image.
  Gaussian off = solid_gaussian(Vec3(50.0, 0, 2.0), 0.01, 0.9, Vec3(1, 0, 0));
  EXPECT_FALSE(project_gaussian(off, cam).has_value());
}

TEST(Render, EmptySceneIsBackground) {
  CameraModel cam = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 32, 40.0);
  const Vec3 bg(0.2, 0.4, 0.6);
  const RenderedImage img = render(GaussianSet(3), cam, bg);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      EXPECT_EQ(img.pixels.at(y, x, 0), 0.2);
      EXPECT_EQ(img.pixels.at(y, x, 1), 0.4);
      EXPECT_EQ(img.pixels.at(y, x, 2), 0.6);
      EXPECT_EQ(img.transmittance[y * 32 + x], 1.0);
    }
}

TEST(Render, SingleOpaqueSplatPeakColor) {
  CameraModel cam = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 32, 40.0);
  const Vec3 color(0.8, 0.3, 0.1);
  const Vec3 bg(0.0, 0.0, 1.0);
  GaussianSet set(0);
  set.add(solid_gaussian(Vec3(0, 0, 1.0), 0.2, 1.0, color));
  const RenderedImage img = render(set, cam, bg);
  const int px = static_cast<int>(cam.cx), py = static_cast<int>(cam.cy);
  for (int c = 0; c < 3; ++c)
    EXPECT_NEAR(img.pixels.at(py, px, c), 0.99 * color[c] + 0.01 * bg[c], 1e-3);
}

TEST(Render, TwoOverlappingSplatsMatchOracleBitExact) {
  CameraModel cam = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 32, 40.0);
  GaussianSet set(0);
  set.add(solid_gaussian(Vec3(-0.02, 0, 1.0), 0.08, 0.7, Vec3(0.9, 0.1, 0.1)));
  set.add(solid_gaussian(Vec3(0.03, 0.01, 1.4), 0.1, 0.6, Vec3(0.1, 0.9, 0.2)));
  const Vec3 bg(0.3, 0.3, 0.3);
  const RenderedImage got = render(set, cam, bg);
  const RenderedImage expect = oracle_render(set, cam, bg);
  EXPECT_EQ(got.pixels.data, expect.pixels.data);
  EXPECT_EQ(got.transmittance, expect.transmittance);
}

TEST(Render, RandomScenesMatchOracleBitExact) {
  Rng rng(42);
  for (int scene = 0; scene < 10; ++scene) {
    CameraModel cam = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 32, 40.0);
    GaussianSet set = random_scene(rng, 1 + static_cast<int>(rng.below(20)), 1,
                                   Vec3(0, 0, 1.2), 0.5);
    const Vec3 bg(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1));
    const RenderedImage got = render(set, cam, bg);
    const RenderedImage expect = oracle_render(set, cam, bg);
    EXPECT_EQ(got.pixels.data, expect.pixels.data) << "scene " << scene;
    EXPECT_EQ(got.transmittance, expect.transmittance) << "scene " << scene;
  }
}

TEST(Render, PermutationInvariantForDistinctDepths) {
  Rng rng(43);
  CameraModel cam = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 32, 40.0);
  GaussianSet set(1);
  for (int i = 0; i < 12; ++i) {
    Gaussian g;
    g.position = Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 1.0 + 0.05 * i);
    g.scale = Vec3::Constant(std::exp(rng.uniform(-4, -2.5)));
    g.opacity = rng.uniform(0.2, 0.9);
    g.sh.resize(12);
    for (double& c : g.sh) c = rng.uniform(-0.4, 0.4);
    set.add(g);
  }
  GaussianSet reversed(1);
  for (std::size_t i = set.count(); i-- > 0;) reversed.add(set.get(i));
  const Vec3 bg(0.5, 0.5, 0.5);
  const RenderedImage a = render(set, cam, bg);
  const RenderedImage b = render(reversed, cam, bg);
  EXPECT_EQ(a.pixels.data, b.pixels.data);
}

TEST(Render, MergeWithEmptyIsBitIdentical) {
  Rng rng(44);
  CameraModel cam = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 32, 40.0);
  GaussianSet set = random_scene(rng, 15, 1, Vec3(0, 0, 1.2), 0.4);
  const GaussianSet merged = merge({set, GaussianSet(1)});
  const Vec3 bg(0.2, 0.2, 0.2);
  EXPECT_EQ(render(set, cam, bg).pixels.data, render(merged, cam, bg).pixels.data);
}

TEST(Render, TiledEqualsSingleThreadBitExact) {
  Rng rng(45);
  CameraModel cam = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 64, 70.0);
  GaussianSet set = random_scene(rng, 40, 2, Vec3(0, 0, 1.2), 0.5);
  const Vec3 bg(0.1, 0.6, 0.3);
  const RenderedImage whole = render(set, cam, bg);
  for (int tile : {16, 17, 64}) {
    const RenderedImage tiled = render_tiled(set, cam, bg, tile, 4);
    EXPECT_EQ(whole.pixels.data, tiled.pixels.data) << "tile " << tile;
    EXPECT_EQ(whole.transmittance, tiled.transmittance) << "tile " << tile;
  }
}

TEST(Render, TransmittanceWithinUnitRange) {
  Rng rng(46);
  CameraModel cam = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 32, 40.0);
  GaussianSet set = random_scene(rng, 30, 0, Vec3(0, 0, 1.0), 0.4);
  const RenderedImage img = render(set, cam, Vec3(0, 0, 0));
  for (double t : img.transmittance) {
    EXPECT_GE(t, 0.0);
    EXPECT_LE(t, 1.0);
  }
  for (double v : img.pixels.data) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Render, ResolutionDoublingKeepsPeakColor) {
  const Vec3 color(0.7, 0.4, 0.2);
  GaussianSet set(0);
  set.add(solid_gaussian(Vec3(0, 0, 1.0), 0.1, 0.85, color));
  CameraModel lo = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 32, 40.0);
  CameraModel hi = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 64, 80.0);
  const RenderedImage a = render(set, lo, Vec3::Zero());
  const RenderedImage b = render(set, hi, Vec3::Zero());
  for (int c = 0; c < 3; ++c)
    EXPECT_NEAR(a.pixels.at(16, 16, c), b.pixels.at(32, 32, c), 1e-3);
}

TEST(RenderMask, EmptyAndIdentityWithTransmittance) {
  Rng rng(47);
  CameraModel cam = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 32, 40.0);
  const Image empty_mask = render_mask(GaussianSet(0), cam);
  for (double v : empty_mask.data) EXPECT_EQ(v, 0.0);

  GaussianSet set = random_scene(rng, 25, 0, Vec3(0, 0, 1.1), 0.4);
  const Image mask = render_mask(set, cam);
  const RenderedImage img = render(set, cam, Vec3(0.5, 0.5, 0.5));
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    EXPECT_NEAR(mask.data[i], 1.0 - img.transmittance[i], 1e-9);
}

TEST(RenderMask, OpaqueSlabSaturates) {
  CameraModel cam = make_camera(Vec3(0, 0, 0), Vec3(0, 0, 1), 32, 40.0);
  GaussianSet set(0);
  // Dense grid of opaque splats covering the full frustum cross-section.
  for (int ix = -6; ix <= 6; ++ix)
    for (int iy = -6; iy <= 6; ++iy)
      set.add(solid_gaussian(Vec3(0.08 * ix, 0.08 * iy, 1.0), 0.06, 1.0, Vec3(1, 1, 1)));
  const Image mask = render_mask(set, cam);
  for (int y = 8; y < 24; ++y)
    for (int x = 8; x < 24; ++x) EXPECT_GT(mask.at(y, x), 0.99);
}

TEST(Ssim, IdenticalSymmetricAndExtremes) {
  Rng rng(48);
  Image a(32, 32, 3), b(32, 32, 3);
  for (double& v : a.data) v = rng.uniform(0, 1);
  for (double& v : b.data) v = rng.uniform(0, 1);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-9);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  Image zeros(32, 32, 1, 0.0), ones(32, 32, 1, 1.0);
  EXPECT_LT(ssim(zeros, ones), 0.01);
  Image small(16, 16, 1);
  EXPECT_THROW(ssim(a, small), InvalidArgument);
}

}  // namespace
}  // namespace splatgen
