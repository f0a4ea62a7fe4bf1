// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace splatgen {

/// Adaptive-moment descent with step-decay, used by both alignment loops:
/// rate 1e-2 halved every 200 steps, up to 1000 steps, early stop when the
/// best loss has not improved by more than 1e-8 for 50 steps.
struct DescentSchedule {
  double rate = 1e-2;
  int decay_every = 200;
  double decay_factor = 0.5;
  int max_steps = 1000;
  int patience = 50;
  double min_improvement = 1e-8;
};

template <int N>
class Adam {
 public:
  using VecN = Eigen::Matrix<double, N, 1>;

  explicit Adam(double rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : rate_(rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_rate(double rate) { rate_ = rate; }

  /// Returns the descent step (to be subtracted from the parameters).
  VecN step(const VecN& grad) {
    ++t_;
    m_ = beta1_ * m_ + (1 - beta1_) * grad;
    v_ = beta2_ * v_ + (1 - beta2_) * grad.cwiseProduct(grad);
    const double bc1 = 1 - std::pow(beta1_, t_);
    const double bc2 = 1 - std::pow(beta2_, t_);
    VecN out;
    for (int i = 0; i < N; ++i)
      out[i] = rate_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
    return out;
  }

 private:
  double rate_, beta1_, beta2_, eps_;
  int t_ = 0;
  VecN m_ = VecN::Zero();
  VecN v_ = VecN::Zero();
};

}  // namespace splatgen
