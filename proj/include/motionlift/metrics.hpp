#pragma once

// Evaluation metrics. 2D errors in pixels, 3D errors in millimeters (inputs
// in meters), foot sliding in meters per frame.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "motionlift/align.hpp"
#include "motionlift/motion.hpp"

namespace motionlift {

namespace detail {

inline void require_same_shape(const KeypointSeq2D& a, const KeypointSeq2D& b, const char* what) {
  if (a.frames() != b.frames() || a.joints() != b.joints()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

inline void require_same_shape(const Seq3D& a, const Seq3D& b, const char* what) {
  if (a.frames != b.frames || a.joints != b.joints) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

}  // namespace detail

/// Mean pixel distance over entries visible in both sequences.
inline double j2d(const KeypointSeq2D& pred, const KeypointSeq2D& gt) {
  detail::require_same_shape(pred, gt, "j2d");
  double sum = 0.0;
  int n = 0;
  for (int t = 0; t < gt.frames(); ++t) {
    for (int k = 0; k < gt.joints(); ++k) {
      if (!pred.visible(t, k) || !gt.visible(t, k)) continue;
      sum += (pred.at(t, k) - gt.at(t, k)).norm();
      ++n;
    }
  }
  require(n > 0, "j2d: no jointly visible entries");
  return sum / n;
}

/// j2d after moving each sequence's hip mean to the image origin per frame.
inline double j2d_centered(const KeypointSeq2D& pred, const KeypointSeq2D& gt,
                           const SkeletonSpec& skel) {
  detail::require_same_shape(pred, gt, "j2d_centered");
  skel.validate(gt.joints());
  KeypointSeq2D p = pred, g = gt;
  for (int t = 0; t < gt.frames(); ++t) {
    const Vec2 hp = hip_mean(pred, skel, t);
    const Vec2 hg = hip_mean(gt, skel, t);
    for (int k = 0; k < gt.joints(); ++k) {
      p.at(t, k) -= hp;
      g.at(t, k) -= hg;
    }
  }
  return j2d(p, g);
}

inline double mpjpe(const Seq3D& pred, const Seq3D& gt) {
  detail::require_same_shape(pred, gt, "mpjpe");
  require(!gt.coords.empty(), "mpjpe: empty sequence");
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.coords.size(); ++i) sum += (pred.coords[i] - gt.coords[i]).norm();
  return 1000.0 * sum / static_cast<double>(gt.coords.size());
}

/// MPJPE after one similarity transform fitted over the whole sequence.
inline double pa_mpjpe(const Seq3D& pred, const Seq3D& gt) {
  detail::require_same_shape(pred, gt, "pa_mpjpe");
  const Similarity s = align_points(pred.coords, gt.coords, true);
  Seq3D aligned = pred;
  for (auto& p : aligned.coords) p = s.apply(p);
  return mpjpe(aligned, gt);
}

/// Per-frame root point: mean of the listed joints (a single pelvis, the two
/// hips, or every object keypoint).
inline std::vector<Vec3> root_track(const Seq3D& seq, const std::vector<int>& joints) {
  require(!joints.empty(), "root_track: no root joints");
  std::vector<Vec3> out;
  for (int t = 0; t < seq.frames; ++t) {
    Vec3 c = Vec3::Zero();
    for (int j : joints) {
      require(j >= 0 && j < seq.joints, "root_track: joint index out of range");
      c += seq.at(t, j);
    }
    out.push_back(c / static_cast<double>(joints.size()));
  }
  return out;
}

inline std::vector<int> human_root_joints(const SkeletonSpec& skel) {
  if (skel.pelvis) return {*skel.pelvis};
  return {skel.left_hip, skel.right_hip};
}

inline double t_root(const Seq3D& pred, const Seq3D& gt, const std::vector<int>& root_joints) {
  detail::require_same_shape(pred, gt, "t_root");
  require(gt.frames > 0, "t_root: empty sequence");
  const auto a = root_track(pred, root_joints);
  const auto b = root_track(gt, root_joints);
  double sum = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) sum += (a[t] - b[t]).norm();
  return 1000.0 * sum / static_cast<double>(a.size());
}

/// Object root error: keypoint centroid trajectory.
inline double t_object_root(const Seq3D& pred, const Seq3D& gt) {
  std::vector<int> all(gt.joints);
  for (int j = 0; j < gt.joints; ++j) all[j] = j;
  return t_root(pred, gt, all);
}

/// Horizontal foot displacement per frame, weighted by 2 - 2^(h/H) clamped
/// to [0, 1] and gated to h < H, averaged over frame pairs and foot joints.
/// h is the foot height (y) at the earlier frame of each pair; ground y = 0.
inline double foot_sliding(const Seq3D& pred, const SkeletonSpec& skel, double height = 0.05) {
  skel.validate(pred.joints);
  if (skel.foot_joints.empty()) throw std::invalid_argument("foot_sliding: no foot joints defined");
  require(height > 0.0, "foot_sliding: height threshold must be positive");
  if (pred.frames < 2) return 0.0;
  double sum = 0.0;
  for (int t = 0; t + 1 < pred.frames; ++t) {
    for (int f : skel.foot_joints) {
      const Vec3& a = pred.at(t, f);
      const Vec3& b = pred.at(t + 1, f);
      const double h = a.y();
      if (h >= height) continue;
      const double w = std::clamp(2.0 - std::pow(2.0, h / height), 0.0, 1.0);
      sum += w * Vec2(b.x() - a.x(), b.z() - a.z()).norm();
    }
  }
  return sum / (static_cast<double>(pred.frames - 1) * skel.foot_joints.size());
}

/// One row of the metrics table. Fields that do not apply stay unset.
struct MetricsRow {
  std::string name;
  std::optional<double> j2d, j2d_centered, t_root, mpjpe, pa_mpjpe, fs, t_o_root, o_mpjpe;
};

struct MetricsReport {
  std::vector<MetricsRow> sequences;

  /// Mean of each field over the sequences that report it.
  MetricsRow aggregate() const {
    MetricsRow out;
    out.name = "mean";
    auto avg = [this](std::optional<double> MetricsRow::*field) -> std::optional<double> {
      double sum = 0.0;
      int n = 0;
      for (const auto& r : sequences) {
        if (r.*field) {
          sum += *(r.*field);
          ++n;
        }
      }
      if (n == 0) return std::nullopt;
      return sum / n;
    };
    out.j2d = avg(&MetricsRow::j2d);
    out.j2d_centered = avg(&MetricsRow::j2d_centered);
    out.t_root = avg(&MetricsRow::t_root);
    out.mpjpe = avg(&MetricsRow::mpjpe);
    out.pa_mpjpe = avg(&MetricsRow::pa_mpjpe);
    out.fs = avg(&MetricsRow::fs);
    out.t_o_root = avg(&MetricsRow::t_o_root);
    out.o_mpjpe = avg(&MetricsRow::o_mpjpe);
    return out;
  }
};

/// Every metric that the inputs allow. `pred_2d`/`gt_2d` may be empty.
inline MetricsRow evaluate_sequence(const std::string& name, const Seq3D& pred, const Seq3D& gt,
                                    const SkeletonSpec& skel, const KeypointSeq2D* pred_2d = nullptr,
                                    const KeypointSeq2D* gt_2d = nullptr,
                                    const Seq3D* pred_obj = nullptr, const Seq3D* gt_obj = nullptr) {
  MetricsRow r;
  r.name = name;
  r.mpjpe = mpjpe(pred, gt);
  r.pa_mpjpe = pa_mpjpe(pred, gt);
  r.t_root = t_root(pred, gt, human_root_joints(skel));
  if (!skel.foot_joints.empty()) r.fs = foot_sliding(pred, skel);
  if (pred_2d && gt_2d) {
    r.j2d = j2d(*pred_2d, *gt_2d);
    r.j2d_centered = j2d_centered(*pred_2d, *gt_2d, skel);
  }
  if (pred_obj && gt_obj) {
    r.o_mpjpe = mpjpe(*pred_obj, *gt_obj);
    r.t_o_root = t_object_root(*pred_obj, *gt_obj);
  }
  return r;
}

}  // namespace motionlift
