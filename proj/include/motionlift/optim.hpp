#pragma once

// Adam and a cosine learning-rate schedule, shared by every optimizer loop.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "motionlift/common.hpp"

namespace motionlift {

struct AdamState {
  VecX m;
  VecX v;
  long step = 0;

  static AdamState zeros(Eigen::Index n) { return {VecX::Zero(n), VecX::Zero(n), 0}; }
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update, in place.
inline void adam_step(VecX& params, const VecX& grad, AdamState& state, const AdamConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size() ||
      grad.size() != params.size()) {
    throw std::invalid_argument("adam_step: state shape does not match parameters");
  }
  ++state.step;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

/// Cosine decay from `base` at step 0 to `base * floor` at `total`.
inline double cosine_lr(double base, int step, int total, double floor = 0.0) {
  if (total <= 1) {
    return base;
  }
  const double f = std::clamp(static_cast<double>(step) / (total - 1), 0.0, 1.0);
  return base * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * f)));
}

}  // namespace motionlift
