#pragma once

// DDPM noise schedule, closed-form forward noising, the Gaussian-prior
// posterior-mean denoiser and ancestral sampling with x0-predicting models.

#include <functional>
#include <vector>

#include "motionlift/common.hpp"

namespace motionlift {

/// Linear beta schedule; steps are 1-based (n = 1..N).
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  static NoiseSchedule linear(int steps, double beta_start, double beta_end) {
    if (steps < 1 || !(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
      throw std::invalid_argument(
          "NoiseSchedule: need N >= 1 and 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.beta_start_ = beta_start;
    s.beta_end_ = beta_end;
    s.beta_.resize(steps);
    s.alpha_.resize(steps);
    s.alpha_bar_.resize(steps);
    double prod = 1.0;
    for (int i = 0; i < steps; ++i) {
      const double f = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
      s.beta_[i] = beta_start + f * (beta_end - beta_start);
      s.alpha_[i] = 1.0 - s.beta_[i];
      prod *= s.alpha_[i];
      s.alpha_bar_[i] = prod;
    }
    return s;
  }

  int steps() const { return static_cast<int>(beta_.size()); }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }

  double beta(int n) const { return beta_.at(check(n)); }
  double alpha(int n) const { return alpha_.at(check(n)); }
  /// alpha_bar(0) is 1 by convention.
  double alpha_bar(int n) const { return n == 0 ? 1.0 : alpha_bar_.at(check(n)); }

  const std::vector<double>& betas() const { return beta_; }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }

 private:
  std::size_t check(int n) const {
    if (n < 1 || n > steps()) {
      throw std::out_of_range("NoiseSchedule: step " + std::to_string(n) + " outside [1, " +
                              std::to_string(steps()) + "]");
    }
    return static_cast<std::size_t>(n - 1);
  }

  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
};

inline NoiseSchedule make_schedule(int steps, double beta_start = 1e-4, double beta_end = 0.02) {
  return NoiseSchedule::linear(steps, beta_start, beta_end);
}

/// X_n = sqrt(abar_n) X_0 + sqrt(1 - abar_n) eps.
inline VecX q_sample(const VecX& x0, int n, const VecX& eps, const NoiseSchedule& sched) {
  require(x0.size() == eps.size(), "q_sample: noise shape mismatch");
  sched.beta(n);  // range check: 1 <= n <= N
  const double ab = sched.alpha_bar(n);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

/// One Markov transition q(X_n | X_{n-1}).
inline VecX q_step(const VecX& x_prev, int n, const VecX& eps, const NoiseSchedule& sched) {
  const double b = sched.beta(n);
  return std::sqrt(1.0 - b) * x_prev + std::sqrt(b) * eps;
}

/// Posterior mean E[x0 | x_n] under an independent Gaussian prior
/// N(mean, var) per coordinate.
inline VecX analytic_gaussian_denoiser(const VecX& xn, int n, const NoiseSchedule& sched,
                                       const VecX& mean, double var) {
  require(var >= 0.0, "analytic_gaussian_denoiser: variance must be non-negative");
  require(xn.size() == mean.size(), "analytic_gaussian_denoiser: shape mismatch");
  const double ab = sched.alpha_bar(n);
  const double denom = (1.0 - ab) + ab * var;
  return ((1.0 - ab) * mean + var * std::sqrt(ab) * xn) / denom;
}

inline VecX x0_to_eps(const VecX& xn, const VecX& x0_hat, int n, const NoiseSchedule& sched) {
  const double ab = sched.alpha_bar(n);
  if (!(ab < 1.0)) {
    throw NumericalError("x0_to_eps: alpha_bar == 1, noise is undefined");
  }
  return (xn - std::sqrt(ab) * x0_hat) / std::sqrt(1.0 - ab);
}

/// x0 prediction from a noisy sample at step n.
using X0Predictor = std::function<VecX(const VecX& xn, int n)>;

/// Mean and variance of q(x_{n-1} | x_n, x0_hat).
struct PosteriorStep {
  double coef_x0 = 0.0;
  double coef_xn = 0.0;
  double variance = 0.0;
};

inline PosteriorStep posterior_step(int n, const NoiseSchedule& sched) {
  const double ab = sched.alpha_bar(n);
  const double ab_prev = sched.alpha_bar(n - 1);
  const double b = sched.beta(n);
  return {std::sqrt(ab_prev) * b / (1.0 - ab), std::sqrt(sched.alpha(n)) * (1.0 - ab_prev) / (1.0 - ab),
          (1.0 - ab_prev) / (1.0 - ab) * b};
}

/// Ancestral sampling from X_N ~ N(0, I). The final step returns the x0
/// prediction itself.
inline VecX reverse_sample(const X0Predictor& predict, Eigen::Index dim, const NoiseSchedule& sched,
                           Rng& rng) {
  VecX x = normal_vector(dim, rng);
  for (int n = sched.steps(); n >= 1; --n) {
    const VecX x0 = predict(x, n);
    if (n == 1) {
      return x0;
    }
    const PosteriorStep p = posterior_step(n, sched);
    x = p.coef_x0 * x0 + p.coef_xn * x + std::sqrt(p.variance) * normal_vector(dim, rng);
  }
  return x;
}

/// Multi-view x0 prediction: one noisy sample per view in, one estimate out.
using MultiViewX0Predictor = std::function<std::vector<VecX>(const std::vector<VecX>& xn, int n)>;

/// Ancestral sampling with one view partly known. Entries of view 0 flagged in
/// `known_mask` are replaced by a forward-noised copy of `known` at every
/// level, and by `known` itself at the end.
inline std::vector<VecX> reverse_sample_clamped(const MultiViewX0Predictor& predict, int views,
                                                Eigen::Index dim, const NoiseSchedule& sched,
                                                const VecX& known,
                                                const std::vector<unsigned char>& known_mask,
                                                Rng& rng) {
  require(views >= 1, "reverse_sample_clamped: need at least one view");
  require(known.size() == dim && known_mask.size() == static_cast<std::size_t>(dim),
          "reverse_sample_clamped: known view has the wrong size");
  auto clamp = [&](VecX& x, int level) {
    const VecX noisy = level == 0 ? known : q_sample(known, level, normal_vector(dim, rng), sched);
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (known_mask[i]) {
        x[i] = noisy[i];
      }
    }
  };
  std::vector<VecX> x;
  for (int v = 0; v < views; ++v) {
    x.push_back(normal_vector(dim, rng));
  }
  clamp(x[0], sched.steps());
  for (int n = sched.steps(); n >= 1; --n) {
    const std::vector<VecX> x0 = predict(x, n);
    if (n == 1) {
      x = x0;
    } else {
      const PosteriorStep p = posterior_step(n, sched);
      for (int v = 0; v < views; ++v) {
        x[v] = p.coef_x0 * x0[v] + p.coef_xn * x[v] + std::sqrt(p.variance) * normal_vector(dim, rng);
      }
    }
    clamp(x[0], n - 1);
  }
  return x;
}

}  // namespace motionlift
