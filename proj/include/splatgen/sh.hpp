// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

#include "splatgen/errors.hpp"
#include "splatgen/transforms.hpp"

namespace splatgen {

inline constexpr int kMaxShDegree = 3;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Real spherical-harmonic basis up to degree 3, in the convention used by
/// standard splat assets (degree-1 ordering ~ (-y, +z, -x)).
/// `dir` must be unit-norm; writes (degree+1)^2 values.
inline void sh_basis(int degree, const Vec3& dir, double* out) {
  const double x = dir.x(), y = dir.y(), z = dir.z();
  out[0] = 0.28209479177387814;
  if (degree < 1) return;
  out[1] = -0.4886025119029199 * y;
  out[2] = 0.4886025119029199 * z;
  out[3] = -0.4886025119029199 * x;
  if (degree < 2) return;
  const double xx = x * x, yy = y * y, zz = z * z;
  const double xy = x * y, yz = y * z, xz = x * z;
  out[4] = 1.0925484305920792 * xy;
  out[5] = -1.0925484305920792 * yz;
  out[6] = 0.31539156525252005 * (2.0 * zz - xx - yy);
  out[7] = -1.0925484305920792 * xz;
  out[8] = 0.5462742152960396 * (xx - yy);
  if (degree < 3) return;
  out[9] = -0.5900435899266435 * y * (3.0 * xx - yy);
  out[10] = 2.890611442640554 * xy * z;
  out[11] = -0.4570457994644658 * y * (4.0 * zz - xx - yy);
  out[12] = 0.3731763325901154 * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  out[13] = -0.4570457994644658 * x * (4.0 * zz - xx - yy);
  out[14] = 1.445305721320277 * z * (xx - yy);
  out[15] = -0.5900435899266435 * x * (xx - 3.0 * yy);
}

/// Evaluates one channel: clamp(0.5 + sum_k c_k Y_k(dir), 0, 1).
inline double evaluate_sh_channel(int degree, const double* coeffs, const Vec3& dir) {
  double basis[16];
  sh_basis(degree, dir, basis);
  double v = 0.5;
  const int n = sh_coeff_count(degree);
  for (int k = 0; k < n; ++k) v += coeffs[k] * basis[k];
  return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

/// Evaluates RGB from channel-major coefficients (3 x (degree+1)^2).
inline Vec3 evaluate_sh(int degree, const double* coeffs, const Vec3& dir) {
  const int n = sh_coeff_count(degree);
  return {evaluate_sh_channel(degree, coeffs, dir),
          evaluate_sh_channel(degree, coeffs + n, dir),
          evaluate_sh_channel(degree, coeffs + 2 * n, dir)};
}

/// Unclamped variant, used where the raw linear value matters (recoloring).
inline double evaluate_sh_channel_raw(int degree, const double* coeffs, const Vec3& dir) {
  double basis[16];
  sh_basis(degree, dir, basis);
  double v = 0.5;
  const int n = sh_coeff_count(degree);
  for (int k = 0; k < n; ++k) v += coeffs[k] * basis[k];
  return v;
}

/// Checked entry point: `coeffs` must hold 3 * (degree+1)^2 values.
inline Vec3 evaluate_sh(int degree, const std::vector<double>& coeffs, const Vec3& dir) {
  if (coeffs.size() != static_cast<std::size_t>(3 * sh_coeff_count(degree)))
    throw InvalidArgument("evaluate_sh: coefficient count does not match sh degree");
  return evaluate_sh(degree, coeffs.data(), dir);
}

/// Per-band rotation matrices for real SH coefficients (Wigner D blocks),
/// built by the Ivanic-Ruedenberg recursion from the band-1 matrix. Bands are
/// orthogonal, so each block preserves the band's coefficient norm.
///
/// Satisfies: evaluate(rotated coeffs, d) == evaluate(coeffs, R^-1 d).
class ShRotation {
 public:
  ShRotation(const Quat& rotation, int degree) : degree_(degree) {
    if (degree < 0 || degree > kMaxShDegree)
      throw InvalidArgument("ShRotation: degree must be in [0, 3]");
    const Quat qn = rotation.normalized();
    if (std::abs(qn.w()) == 1.0 && qn.x() == 0.0 && qn.y() == 0.0 && qn.z() == 0.0) {
      identity_ = true;  // keeps coefficients bit-identical under no rotation
      return;
    }
    const Mat3 r = qn.toRotationMatrix();
    // Band 1 in SH ordering (m = -1, 0, 1) ~ (-y, z, -x): permuted rotation
    // conjugated by diag(-1, 1, -1) to account for the basis signs.
    band_[1].resize(3, 3);
    band_[1] <<  r(1, 1), -r(1, 2),  r(1, 0),
                -r(2, 1),  r(2, 2), -r(2, 0),
                 r(0, 1), -r(0, 2),  r(0, 0);
    for (int l = 2; l <= degree_; ++l) compute_band(l);
  }

  int degree() const { return degree_; }

  const Eigen::MatrixXd& band(int l) const { return band_[l]; }

  /// Rotates one channel of coefficients in place ((degree+1)^2 values).
  void apply_channel(double* coeffs) const {
    if (identity_) return;
    for (int l = 1; l <= degree_; ++l) {
      const int n = 2 * l + 1;
      Eigen::Map<Eigen::VectorXd> seg(coeffs + l * l, n);
      seg = (band_[l] * seg).eval();
    }
  }

 private:
  double p(int i, int a, int b, int l) const {
    const Eigen::MatrixXd& r1 = band_[1];
    const Eigen::MatrixXd& rp = band_[l - 1];
    if (b == l) {
      return r1(i + 1, 2) * rp(a + l - 1, 2 * l - 2) - r1(i + 1, 0) * rp(a + l - 1, 0);
    } else if (b == -l) {
      return r1(i + 1, 2) * rp(a + l - 1, 0) + r1(i + 1, 0) * rp(a + l - 1, 2 * l - 2);
    }
    return r1(i + 1, 1) * rp(a + l - 1, b + l - 1);
  }

  double u_term(int m, int n, int l) const { return p(0, m, n, l); }

  double v_term(int m, int n, int l) const {
    if (m == 0) return p(1, 1, n, l) + p(-1, -1, n, l);
    if (m > 0) {
      const double d = (m == 1) ? 1.0 : 0.0;
      return p(1, m - 1, n, l) * std::sqrt(1.0 + d) - p(-1, -m + 1, n, l) * (1.0 - d);
    }
    const double d = (m == -1) ? 1.0 : 0.0;
    return p(1, m + 1, n, l) * (1.0 - d) + p(-1, -m - 1, n, l) * std::sqrt(1.0 + d);
  }

  double w_term(int m, int n, int l) const {
    if (m > 0) return p(1, m + 1, n, l) + p(-1, -m - 1, n, l);
    return p(1, m - 1, n, l) - p(-1, -m + 1, n, l);
  }

  void compute_band(int l) {
    Eigen::MatrixXd rot(2 * l + 1, 2 * l + 1);
    for (int m = -l; m <= l; ++m) {
      const int am = std::abs(m);
      for (int n = -l; n <= l; ++n) {
        const double denom = (std::abs(n) == l) ? double(2 * l) * double(2 * l - 1)
                                                : double(l + n) * double(l - n);
        const double du = (m == 0) ? 1.0 : 0.0;
        double u = std::sqrt(double(l + m) * double(l - m) / denom);
        double v = 0.5 * std::sqrt((1.0 + du) * double(l + am - 1) * double(l + am) / denom) *
                   (1.0 - 2.0 * du);
        double w = -0.5 * std::sqrt(double(l - am - 1) * double(l - am) / denom) * (1.0 - du);
        if (u != 0.0) u *= u_term(m, n, l);
        if (v != 0.0) v *= v_term(m, n, l);
        if (w != 0.0) w *= w_term(m, n, l);
        rot(m + l, n + l) = u + v + w;
      }
    }
    band_[l] = rot;
  }

  int degree_;
  bool identity_ = false;
  std::array<Eigen::MatrixXd, kMaxShDegree + 1> band_;
};

/// Rotates channel-major coefficients (3 channels) in place.
inline void rotate_sh_inplace(int degree, double* coeffs, const ShRotation& rot) {
  const int n = sh_coeff_count(degree);
  for (int ch = 0; ch < 3; ++ch) rot.apply_channel(coeffs + ch * n);
}

}  // namespace splatgen
