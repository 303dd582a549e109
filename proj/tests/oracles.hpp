#pragma once

// Independent reference computations used only by the tests.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Geometry>

#include "motionlift/camera.hpp"
#include "motionlift/common.hpp"

namespace motionlift::oracle {

/// Central differences of a scalar function.
inline VecX finite_difference(const std::function<double(const VecX&)>& f, const VecX& x,
                              double h = 1e-5) {
  VecX g(x.size());
  VecX xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const double fp = f(xp);
    xp[i] = orig - h;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Largest per-entry relative error, with an absolute floor for tiny entries.
inline double max_relative_error(const VecX& a, const VecX& b, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(standard_normal(rng), standard_normal(rng), standard_normal(rng),
                       standard_normal(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Vec3 random_vec3(Rng& rng, double scale = 1.0) {
  return scale * Vec3(standard_normal(rng), standard_normal(rng), standard_normal(rng));
}

inline CameraExtrinsic random_extrinsic(Rng& rng, double t_scale = 1.0) {
  return {random_rotation(rng), random_vec3(rng, t_scale)};
}

/// Camera on a sphere of radius `dist` around `target`, looking at it.
inline CameraExtrinsic random_camera_looking_at(Rng& rng, const Vec3& target, double dist) {
  Vec3 dir = random_vec3(rng);
  dir.y() = 0.3 * dir.y();
  dir.normalize();
  return look_at(target + dist * dir, target, Vec3(0, 1, 0));
}

inline double brute_chamfer(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  auto one_side = [](const std::vector<Vec2>& p, const std::vector<Vec2>& q) {
    double sum = 0.0;
    for (const auto& x : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : q) {
        const double dx = x.x() - y.x();
        const double dy = x.y() - y.y();
        best = std::min(best, dx * dx + dy * dy);
      }
      sum += best;
    }
    return sum / static_cast<double>(p.size());
  };
  return one_side(a, b) + one_side(b, a);
}

}  // namespace motionlift::oracle
