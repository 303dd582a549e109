#pragma once

// Object trajectory from lifted 3D object keypoints: per-frame closed-form
// initialization, then a joint fit of 6D rotations and translations with a
// temporal smoothness term. The scale is global and held fixed.

#include <algorithm>
#include <vector>

#include <ceres/jet.h>

#include "motionlift/align.hpp"
#include "motionlift/camera.hpp"
#include "motionlift/motion.hpp"
#include "motionlift/optim.hpp"
#include "motionlift/rotation.hpp"

namespace motionlift {

/// Keypoints on the canonical object mesh, in meters.
struct CanonicalKeypoints {
  std::vector<Vec3> points;
  int reference_a = 0;  // pair used for scale estimation
  int reference_b = 1;

  int size() const { return static_cast<int>(points.size()); }

  void validate() const {
    require(size() >= 2, "CanonicalKeypoints: need at least two points");
    require(reference_a >= 0 && reference_a < size() && reference_b >= 0 &&
                reference_b < size() && reference_a != reference_b,
            "CanonicalKeypoints: invalid reference pair");
    if ((points[reference_a] - points[reference_b]).norm() < 1e-12) {
      throw GeometryError("CanonicalKeypoints: reference pair has zero separation");
    }
  }
};

struct ObjectPose {
  std::vector<Rot6d> rot6d;       // T
  std::vector<Vec3> translation;  // T, meters
  double scale = 1.0;

  int frames() const { return static_cast<int>(rot6d.size()); }
  Mat3 rotation(int t) const { return rot6d_to_matrix(rot6d[t]); }

  void validate() const {
    require(translation.size() == rot6d.size(), "ObjectPose: rotation/translation length mismatch");
    require(scale > 0.0 && std::isfinite(scale), "ObjectPose: scale must be positive");
  }
};

/// Per-frame scale from the reference pair.
inline double estimate_scale(const std::vector<Vec3>& frame, const CanonicalKeypoints& canon) {
  canon.validate();
  require(static_cast<int>(frame.size()) == canon.size(), "estimate_scale: keypoint count mismatch");
  return (frame[canon.reference_a] - frame[canon.reference_b]).norm() /
         (canon.points[canon.reference_a] - canon.points[canon.reference_b]).norm();
}

/// Rigid alignment of s * P onto the visible keypoints of one frame.
inline Similarity init_pose_frame(const std::vector<Vec3>& frame, const CanonicalKeypoints& canon,
                                  double scale, const std::vector<unsigned char>& visible = {}) {
  require(static_cast<int>(frame.size()) == canon.size(), "init_pose_frame: keypoint count mismatch");
  require(visible.empty() || visible.size() == frame.size(), "init_pose_frame: mask size mismatch");
  std::vector<Vec3> src, dst;
  for (int i = 0; i < canon.size(); ++i) {
    if (visible.empty() || visible[i]) {
      src.push_back(scale * canon.points[i]);
      dst.push_back(frame[i]);
    }
  }
  Similarity s = align_points(src, dst, false);
  s.scale = scale;
  return s;
}

enum class FitOptimizer { kAdam, kMonotoneDescent };

struct ObjectFitConfig {
  int iterations = 2000;
  double lr = 0.05;
  double lr_floor = 0.0;
  double lambda_smooth = 0.1;
  FitOptimizer optimizer = FitOptimizer::kAdam;

  void validate() const {
    require(iterations >= 0 && lr > 0.0 && lambda_smooth >= 0.0,
            "ObjectFitConfig: invalid settings");
  }
};

struct ObjectFitResult {
  ObjectPose pose;
  ObjectPose initial;
  std::vector<double> per_frame_scale;
  std::vector<double> objective_history;  // fit + lambda * smooth, per iteration and final
  std::vector<double> smooth_history;
  double fit_loss = 0.0;
  double smooth_loss = 0.0;
};

namespace detail {

inline constexpr int kPoseParams = 9;  // rot6d + translation

/// Euclidean norm whose derivative at zero is taken as zero.
template <typename T>
T safe_norm(const Eigen::Matrix<T, 3, 1>& v) {
  using std::sqrt;
  const T sq = v.squaredNorm();
  if (sq == T(0.0)) {
    return T(0.0);
  }
  return sqrt(sq);
}

template <typename T>
T frame_fit(const T* x, const std::vector<Vec3>& frame, const CanonicalKeypoints& canon,
            double scale, const std::vector<unsigned char>& visible) {
  const Eigen::Matrix<T, 3, 3> r = rot6d_to_matrix_unchecked(x);
  const Eigen::Matrix<T, 3, 1> t(x[6], x[7], x[8]);
  T sum(0.0);
  for (int i = 0; i < canon.size(); ++i) {
    if (!visible[i]) continue;
    const Eigen::Matrix<T, 3, 1> p = canon.points[i].cast<T>();
    sum += safe_norm<T>(T(scale) * (r * p) + t - frame[i].cast<T>());
  }
  return sum;
}

struct FitObjective {
  const Seq3D& q;
  const CanonicalKeypoints& canon;
  const std::vector<unsigned char>& visible;
  double scale;
  double lambda;

  int frames() const { return q.frames; }

  /// Returns fit + lambda * smooth; fills the gradient when `grad` is set.
  double operator()(const VecX& x, VecX* grad, double* fit_out = nullptr,
                    double* smooth_out = nullptr) const {
    using J = ceres::Jet<double, kPoseParams>;
    const int T = frames();
    const double fit_norm = 1.0 / (static_cast<double>(T) * canon.size());
    const double smooth_norm = T > 1 ? 1.0 / (T - 1) : 0.0;
    if (grad) *grad = VecX::Zero(x.size());
    double fit = 0.0;
    for (int t = 0; t < T; ++t) {
      std::array<J, kPoseParams> v;
      for (int k = 0; k < kPoseParams; ++k) v[k] = J(x[t * kPoseParams + k], k);
      const J f = frame_fit<J>(v.data(), q.frame(t), canon, scale, visible);
      fit += f.a;
      if (grad) {
        for (int k = 0; k < kPoseParams; ++k) (*grad)[t * kPoseParams + k] += fit_norm * f.v[k];
      }
    }
    double smooth = 0.0;
    for (int t = 0; t + 1 < T; ++t) {
      const Rot6d d = x.segment<6>(t * kPoseParams) - x.segment<6>((t + 1) * kPoseParams);
      const double n = d.norm();
      smooth += n;
      if (grad && n > 0.0) {
        const Rot6d g = lambda * smooth_norm * d / n;
        grad->segment<6>(t * kPoseParams) += g;
        grad->segment<6>((t + 1) * kPoseParams) -= g;
      }
    }
    fit *= fit_norm;
    smooth *= smooth_norm;
    if (fit_out) *fit_out = fit;
    if (smooth_out) *smooth_out = smooth;
    return fit + lambda * smooth;
  }
};

/// Maps every frame's 6D block back to two orthonormal columns.
inline void reproject_rotations(VecX& x, int frames) {
  for (int t = 0; t < frames; ++t) {
    const Rot6d r = x.segment<6>(t * kPoseParams);
    x.segment<6>(t * kPoseParams) = matrix_to_rot6d(rot6d_to_matrix(r));
  }
}

inline VecX pack_pose(const ObjectPose& p) {
  VecX x(p.frames() * kPoseParams);
  for (int t = 0; t < p.frames(); ++t) {
    x.segment<6>(t * kPoseParams) = p.rot6d[t];
    x.segment<3>(t * kPoseParams + 6) = p.translation[t];
  }
  return x;
}

inline ObjectPose unpack_pose(const VecX& x, int frames, double scale) {
  ObjectPose p;
  p.scale = scale;
  for (int t = 0; t < frames; ++t) {
    p.rot6d.push_back(x.segment<6>(t * kPoseParams));
    p.translation.push_back(x.segment<3>(t * kPoseParams + 6));
  }
  return p;
}

}  // namespace detail

/// Closed-form initialization for every frame with the median scale.
inline ObjectFitResult init_object_trajectory(const Seq3D& q, const CanonicalKeypoints& canon,
                                              const std::vector<unsigned char>& visible) {
  canon.validate();
  q.validate();
  require(q.joints == canon.size(), "fit_object_trajectory: keypoint count mismatch");
  require(visible.size() == static_cast<std::size_t>(canon.size()),
          "fit_object_trajectory: visibility mask must have one entry per keypoint");
  require(visible[canon.reference_a] && visible[canon.reference_b],
          "fit_object_trajectory: reference pair must be visible");
  require(q.frames >= 1, "fit_object_trajectory: empty sequence");
  ObjectFitResult r;
  for (int t = 0; t < q.frames; ++t) r.per_frame_scale.push_back(estimate_scale(q.frame(t), canon));
  std::vector<double> sorted = r.per_frame_scale;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  const double s = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  if (!(s > 0.0)) {
    throw GeometryError("fit_object_trajectory: degenerate scale estimate");
  }
  r.initial.scale = s;
  for (int t = 0; t < q.frames; ++t) {
    const Similarity a = init_pose_frame(q.frame(t), canon, s, visible);
    r.initial.rot6d.push_back(matrix_to_rot6d(a.rotation));
    r.initial.translation.push_back(a.translation);
  }
  return r;
}

/// Refines `init.initial` (or `start` when given) against `q`.
inline ObjectFitResult fit_object_trajectory(const Seq3D& q, const CanonicalKeypoints& canon,
                                             const std::vector<unsigned char>& visible,
                                             const ObjectFitConfig& cfg = {},
                                             const ObjectPose* start = nullptr) {
  cfg.validate();
  ObjectFitResult r = init_object_trajectory(q, canon, visible);
  if (start) {
    start->validate();
    require(start->frames() == q.frames, "fit_object_trajectory: start pose length mismatch");
    r.initial = *start;
  }
  const int T = q.frames;
  const detail::FitObjective objective{q, canon, visible, r.initial.scale, cfg.lambda_smooth};
  VecX x = detail::pack_pose(r.initial);
  detail::reproject_rotations(x, T);

  AdamState adam = AdamState::zeros(x.size());
  double step = cfg.lr;
  VecX g;
  for (int it = 0; it < cfg.iterations; ++it) {
    double smooth = 0.0;
    const double obj = objective(x, &g, nullptr, &smooth);
    r.objective_history.push_back(obj);
    r.smooth_history.push_back(smooth);
    if (!std::isfinite(obj) || !g.allFinite()) {
      throw NumericalError("fit_object_trajectory: non-finite objective");
    }
    if (cfg.optimizer == FitOptimizer::kMonotoneDescent) {
      for (int tries = 0; tries < 40; ++tries) {
        VecX trial = x - step * g;
        detail::reproject_rotations(trial, T);
        if (objective(trial, nullptr) <= obj) {
          x = std::move(trial);
          step *= 1.5;
          break;
        }
        step *= 0.5;
      }
    } else {
      adam_step(x, g, adam, {cosine_lr(cfg.lr, it, cfg.iterations, cfg.lr_floor)});
      detail::reproject_rotations(x, T);
    }
  }
  double fit = 0.0, smooth = 0.0;
  r.objective_history.push_back(objective(x, nullptr, &fit, &smooth));
  r.smooth_history.push_back(smooth);
  r.fit_loss = fit;
  r.smooth_loss = smooth;
  r.pose = detail::unpack_pose(x, T, r.initial.scale);
  return r;
}

/// Canonical keypoints placed by the pose: s R(r_t) p_i + t_t. `subset`
/// selects keypoint indices (all when empty).
inline Seq3D keypoints_from_pose(const ObjectPose& pose, const CanonicalKeypoints& canon,
                                 const std::vector<int>& subset = {}) {
  pose.validate();
  std::vector<int> idx = subset;
  if (idx.empty()) {
    for (int i = 0; i < canon.size(); ++i) idx.push_back(i);
  }
  Seq3D out(pose.frames(), static_cast<int>(idx.size()));
  for (int t = 0; t < pose.frames(); ++t) {
    const Mat3 r = pose.rotation(t);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      require(idx[j] >= 0 && idx[j] < canon.size(), "keypoints_from_pose: index out of range");
      out.at(t, static_cast<int>(j)) = pose.scale * (r * canon.points[idx[j]]) + pose.translation[t];
    }
  }
  return out;
}

/// Mean visible Euclidean error per frame between posed keypoints and `q`.
inline std::vector<double> object_fit_residuals(const ObjectPose& pose, const CanonicalKeypoints& canon,
                                                const Seq3D& q,
                                                const std::vector<unsigned char>& visible) {
  const Seq3D placed = keypoints_from_pose(pose, canon);
  require(placed.frames == q.frames && placed.joints == q.joints,
          "object_fit_residuals: shape mismatch");
  std::vector<double> out;
  for (int t = 0; t < q.frames; ++t) {
    double sum = 0.0;
    int n = 0;
    for (int i = 0; i < q.joints; ++i) {
      if (!visible[i]) continue;
      sum += (placed.at(t, i) - q.at(t, i)).norm();
      ++n;
    }
    out.push_back(n ? sum / n : 0.0);
  }
  return out;
}

}  // namespace motionlift
