// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "splatgen/errors.hpp"
#include "splatgen/rng.hpp"
#include "splatgen/sh.hpp"
#include "splatgen/transforms.hpp"

namespace splatgen {

/// One splat primitive. Scale is linear (post-activation), opacity in [0, 1],
/// sh holds 3 * (degree+1)^2 channel-major coefficients.
struct Gaussian {
  Vec3 position{0, 0, 0};
  Quat rotation{1, 0, 0, 0};
  Vec3 scale{1e-2, 1e-2, 1e-2};
  double opacity = 1.0;
  std::vector<double> sh;
};

/// Covariance R * S * S^T * R^T of a primitive with the given orientation and
/// per-axis scale. Symmetric positive-definite for positive scales.
inline Mat3 covariance_of(const Quat& rotation, const Vec3& scale) {
  if (!(scale.x() > 0 && scale.y() > 0 && scale.z() > 0))
    throw InvalidArgument("covariance_of: scale components must be positive");
  const Mat3 r = rotation.normalized().toRotationMatrix();
  const Mat3 m = r * scale.asDiagonal();
  return m * m.transpose();
}

/// Columnar set of Gaussians with a homogeneous SH degree.
class GaussianSet {
 public:
  GaussianSet() = default;
  explicit GaussianSet(int sh_degree) : sh_degree_(sh_degree) {
    if (sh_degree < 0 || sh_degree > kMaxShDegree)
      throw InvalidArgument("GaussianSet: sh_degree must be in [0, 3]");
  }

  int sh_degree() const { return sh_degree_; }
  int coeffs_per_channel() const { return sh_coeff_count(sh_degree_); }
  std::size_t count() const { return positions_.size(); }
  bool empty() const { return positions_.empty(); }

  void reserve(std::size_t n) {
    positions_.reserve(n);
    rotations_.reserve(n);
    scales_.reserve(n);
    opacities_.reserve(n);
    sh_.reserve(n * 3 * coeffs_per_channel());
  }

  void add(const Gaussian& g) {
    const std::size_t n = 3 * static_cast<std::size_t>(coeffs_per_channel());
    if (g.sh.size() != n)
      throw InvalidArgument("GaussianSet::add: expected " + std::to_string(n) +
                            " sh coefficients, got " + std::to_string(g.sh.size()));
    if (std::abs(g.rotation.norm() - 1.0) > 1e-6)
      throw InvalidArgument("GaussianSet::add: rotation quaternion must be unit-norm");
    if (!(g.scale.x() > 0 && g.scale.y() > 0 && g.scale.z() > 0))
      throw InvalidArgument("GaussianSet::add: scale components must be positive");
    if (g.opacity < 0.0 || g.opacity > 1.0)
      throw InvalidArgument("GaussianSet::add: opacity must be in [0, 1]");
    positions_.push_back(g.position);
    rotations_.push_back(g.rotation);
    scales_.push_back(g.scale);
    opacities_.push_back(g.opacity);
    sh_.insert(sh_.end(), g.sh.begin(), g.sh.end());
  }

  Gaussian get(std::size_t i) const {
    Gaussian g;
    g.position = positions_[i];
    g.rotation = rotations_[i];
    g.scale = scales_[i];
    g.opacity = opacities_[i];
    const double* p = sh_ptr(i);
    g.sh.assign(p, p + 3 * coeffs_per_channel());
    return g;
  }

  const std::vector<Vec3>& positions() const { return positions_; }
  const std::vector<Quat>& rotations() const { return rotations_; }
  const std::vector<Vec3>& scales() const { return scales_; }
  const std::vector<double>& opacities() const { return opacities_; }
  const std::vector<double>& sh() const { return sh_; }

  const double* sh_ptr(std::size_t i) const { return sh_.data() + i * 3 * coeffs_per_channel(); }

  /// Centroid and bounding radius of the positions; used to place cameras.
  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const Vec3& p : positions_) c += p;
    return empty() ? c : Vec3(c / static_cast<double>(count()));
  }

  double bounding_radius() const {
    const Vec3 c = centroid();
    double r = 0.0;
    for (const Vec3& p : positions_) r = std::max(r, (p - c).norm());
    return r;
  }

 private:
  friend GaussianSet apply_similarity(const GaussianSet&, const SimilarityTransform&);
  friend GaussianSet recolor_diffuse(const GaussianSet&, const struct LightingParams&,
                                     std::uint64_t);

  int sh_degree_ = kMaxShDegree;
  std::vector<Vec3> positions_;
  std::vector<Quat> rotations_;
  std::vector<Vec3> scales_;
  std::vector<double> opacities_;
  std::vector<double> sh_;
};

/// Per-channel affine recoloring of the diffuse band plus per-Gaussian noise.
struct LightingParams {
  Vec3 scale{1, 1, 1};
  Vec3 offset{0, 0, 0};
  double noise_std = 0.0;
};

/// Transforms every primitive: position scaled, rotated, then offset;
/// orientation composed; scale multiplied; SH rotated band-wise.
inline GaussianSet apply_similarity(const GaussianSet& set, const SimilarityTransform& t) {
  if (!(t.scale > 0)) throw InvalidArgument("apply_similarity: scale must be positive");
  GaussianSet out(set.sh_degree());
  out.reserve(set.count());
  const ShRotation sh_rot(t.rotation, set.sh_degree());
  const std::size_t per = 3 * static_cast<std::size_t>(set.coeffs_per_channel());
  out.positions_.resize(set.count());
  out.rotations_.resize(set.count());
  out.scales_.resize(set.count());
  out.opacities_ = set.opacities_;
  out.sh_ = set.sh_;
  for (std::size_t i = 0; i < set.count(); ++i) {
    out.positions_[i] = t.apply(set.positions_[i]);
    out.rotations_[i] = (t.rotation * set.rotations_[i]).normalized();
    out.scales_[i] = t.scale * set.scales_[i];
    rotate_sh_inplace(set.sh_degree(), out.sh_.data() + i * per, sh_rot);
  }
  return out;
}

/// Maps each Gaussian's diffuse color c -> s*c + o + N(0, noise_std^2), with
/// scale/offset shared across the set and noise drawn per Gaussian per
/// channel from `seed`. Higher SH bands and all geometry pass through.
inline GaussianSet recolor_diffuse(const GaussianSet& set, const LightingParams& p,
                                   std::uint64_t seed) {
  if (p.noise_std < 0) throw InvalidArgument("recolor_diffuse: noise_std must be >= 0");
  GaussianSet out = set;
  constexpr double kY00 = 0.28209479177387814;
  const std::size_t per = 3 * static_cast<std::size_t>(set.coeffs_per_channel());
  const int n = set.coeffs_per_channel();
  Rng rng(seed);
  for (std::size_t i = 0; i < out.count(); ++i) {
    double* sh = out.sh_.data() + i * per;
    for (int ch = 0; ch < 3; ++ch) {
      const double noise = p.noise_std > 0 ? rng.normal(0.0, p.noise_std) : 0.0;
      double& c0 = sh[ch * n];
      const double color = 0.5 + kY00 * c0;
      const double delta = (p.scale[ch] - 1.0) * color + p.offset[ch] + noise;
      c0 += delta / kY00;
    }
  }
  return out;
}

/// Concatenates sets in input order. Non-empty inputs must share sh_degree.
inline GaussianSet merge(const std::vector<GaussianSet>& sets) {
  int degree = -1;
  std::size_t total = 0;
  for (const GaussianSet& s : sets) {
    if (!s.empty()) {
      if (degree < 0) degree = s.sh_degree();
      else if (degree != s.sh_degree())
        throw InvalidArgument("merge: sh_degree mismatch across inputs");
      total += s.count();
    }
  }
  GaussianSet out(degree < 0 ? kMaxShDegree : degree);
  out.reserve(total);
  for (const GaussianSet& s : sets)
    for (std::size_t i = 0; i < s.count(); ++i) out.add(s.get(i));
  return out;
}

}  // namespace splatgen
