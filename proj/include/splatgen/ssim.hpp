// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "splatgen/errors.hpp"
#include "splatgen/image.hpp"

namespace splatgen {

/// Structural similarity with an 11x11 Gaussian window (sigma 1.5) and the
/// standard stabilizers C1 = 0.01^2, C2 = 0.03^2 for [0, 1] images. Local
/// statistics use valid window placements only; the result is the mean over
/// pixels and channels.
inline double ssim(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    throw InvalidArgument("ssim: image dimensions must match");
  constexpr int kWin = 11;
  constexpr int kHalf = kWin / 2;
  if (a.width < kWin || a.height < kWin)
    throw InvalidArgument("ssim: images must be at least 11x11");
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;

  double w[kWin];
  double wsum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kHalf;
    w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    wsum += w[i];
  }
  for (double& v : w) v /= wsum;

  const int width = a.width, height = a.height;
  const auto filt = [&](const std::vector<double>& src, std::vector<double>& dst,
                        std::vector<double>& tmp) {
    // Horizontal pass (valid in x), then vertical (valid in y).
    for (int y = 0; y < height; ++y)
      for (int x = kHalf; x < width - kHalf; ++x) {
        double s = 0.0;
        for (int k = 0; k < kWin; ++k) s += w[k] * src[y * width + x - kHalf + k];
        tmp[y * width + x] = s;
      }
    for (int y = kHalf; y < height - kHalf; ++y)
      for (int x = kHalf; x < width - kHalf; ++x) {
        double s = 0.0;
        for (int k = 0; k < kWin; ++k) s += w[k] * tmp[(y - kHalf + k) * width + x];
        dst[y * width + x] = s;
      }
  };

  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<double> xs(n), ys(n), xx(n), yy(n), xy(n);
  std::vector<double> mx(n), my(n), mxx(n), myy(n), mxy(n), tmp(n);

  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      const double va = a.data[i * a.channels + c];
      const double vb = b.data[i * b.channels + c];
      xs[i] = va;
      ys[i] = vb;
      xx[i] = va * va;
      yy[i] = vb * vb;
      xy[i] = va * vb;
    }
    filt(xs, mx, tmp);
    filt(ys, my, tmp);
    filt(xx, mxx, tmp);
    filt(yy, myy, tmp);
    filt(xy, mxy, tmp);
    double acc = 0.0;
    std::size_t cnt = 0;
    for (int y = kHalf; y < height - kHalf; ++y)
      for (int x = kHalf; x < width - kHalf; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        const double ux = mx[i], uy = my[i];
        const double vx = mxx[i] - ux * ux;
        const double vy = myy[i] - uy * uy;
        const double cov = mxy[i] - ux * uy;
        acc += ((2 * ux * uy + kC1) * (2 * cov + kC2)) /
               ((ux * ux + uy * uy + kC1) * (vx + vy + kC2));
        ++cnt;
      }
    total += acc / static_cast<double>(cnt);
  }
  return total / a.channels;
}

}  // namespace splatgen
