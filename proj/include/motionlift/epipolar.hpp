#pragma once

// Epipoles, fundamental matrices, epipolar line sets and the point-line
// residual used by the line-matching losses.

#include <vector>

#include <Eigen/SVD>

#include "motionlift/camera.hpp"
#include "motionlift/motion.hpp"

namespace motionlift {

/// Per-frame, per-keypoint lines (a, b, c) with a x + b y + c = 0.
///
/// Valid lines have a^2 + b^2 = 1. Invalid entries are stored as the zero
/// triple, so validity needs no separate flag.
class EpipolarLineSet {
 public:
  EpipolarLineSet() = default;
  EpipolarLineSet(int frames, int joints)
      : frames_(frames),
        joints_(joints),
        lines_(static_cast<std::size_t>(frames) * joints, Vec3::Zero()) {}

  int frames() const { return frames_; }
  int joints() const { return joints_; }

  Vec3& at(int t, int k) { return lines_[static_cast<std::size_t>(t) * joints_ + k]; }
  const Vec3& at(int t, int k) const { return lines_[static_cast<std::size_t>(t) * joints_ + k]; }
  bool valid(int t, int k) const { return at(t, k).head<2>().squaredNorm() > 0.0; }

  const std::vector<Vec3>& lines() const { return lines_; }

 private:
  int frames_ = 0;
  int joints_ = 0;
  std::vector<Vec3> lines_;
};

/// Scales (a, b, c) so a^2 + b^2 = 1; returns zero when (a, b) vanishes.
inline Vec3 normalize_line(const Vec3& l, double eps = 1e-12) {
  const double n = l.head<2>().norm();
  if (!(n > eps) || !l.allFinite()) {
    return Vec3::Zero();
  }
  return l / n;
}

struct FundamentalMatrix {
  Mat3 m = Mat3::Zero();

  /// Ratio of smallest to largest singular value.
  double rank_deficiency() const {
    Eigen::JacobiSVD<Mat3> svd(m);
    const auto s = svd.singularValues();
    return s[2] / s[0];
  }
};

/// Homogeneous projection of camera u's center into view v, given the
/// transform `rel` from u's frame to v's. The zero vector signals a zero
/// baseline, where no epipole exists; a zero last entry is a point at infinity.
inline Vec3 epipole(const CameraExtrinsic& rel, const CameraIntrinsics& intr_v) {
  return intr_v.matrix() * rel.translation;
}

/// Lines through each keypoint and a common epipole.
inline EpipolarLineSet training_epipolar_lines(const KeypointSeq2D& seq, const Vec3& epipole_h) {
  EpipolarLineSet out(seq.frames(), seq.joints());
  for (int t = 0; t < seq.frames(); ++t) {
    for (int k = 0; k < seq.joints(); ++k) {
      if (!seq.visible(t, k)) {
        continue;
      }
      const Vec3 x(seq.at(t, k).x(), seq.at(t, k).y(), 1.0);
      out.at(t, k) = normalize_line(x.cross(epipole_h));
    }
  }
  return out;
}

/// Per-frame epipoles, one per frame of a camera pair.
inline EpipolarLineSet training_epipolar_lines(const KeypointSeq2D& seq,
                                               const std::vector<Vec3>& epipoles) {
  require(epipoles.size() == static_cast<std::size_t>(seq.frames()),
          "training_epipolar_lines: need one epipole per frame");
  EpipolarLineSet out(seq.frames(), seq.joints());
  for (int t = 0; t < seq.frames(); ++t) {
    for (int k = 0; k < seq.joints(); ++k) {
      if (!seq.visible(t, k)) {
        continue;
      }
      const Vec3 x(seq.at(t, k).x(), seq.at(t, k).y(), 1.0);
      out.at(t, k) = normalize_line(x.cross(epipoles[t]));
    }
  }
  return out;
}

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

/// F with x_v^T F x_u = 0 for corresponding pixels, scaled to unit Frobenius
/// norm. Throws GeometryError for a zero-baseline pair.
inline FundamentalMatrix fundamental_matrix(const CameraExtrinsic& rel,
                                            const CameraIntrinsics& intr_u,
                                            const CameraIntrinsics& intr_v) {
  if (!(rel.translation.norm() > 1e-9)) {
    throw GeometryError("fundamental_matrix: zero baseline between views");
  }
  Mat3 f = intr_v.inverse_matrix().transpose() * skew(rel.translation) * rel.rotation *
           intr_u.inverse_matrix();
  f /= f.norm();
  return {f};
}

/// Lines in view v induced by the keypoints of view u.
inline EpipolarLineSet cross_view_epipolar_lines(const KeypointSeq2D& seq_u,
                                                 const FundamentalMatrix& f) {
  EpipolarLineSet out(seq_u.frames(), seq_u.joints());
  for (int t = 0; t < seq_u.frames(); ++t) {
    for (int k = 0; k < seq_u.joints(); ++k) {
      if (!seq_u.visible(t, k)) {
        continue;
      }
      out.at(t, k) = normalize_line(f.m * Vec3(seq_u.at(t, k).x(), seq_u.at(t, k).y(), 1.0));
    }
  }
  return out;
}

/// Same with one fundamental matrix per frame (moving cameras).
inline EpipolarLineSet cross_view_epipolar_lines(const KeypointSeq2D& seq_u,
                                                 const std::vector<FundamentalMatrix>& fs) {
  require(fs.size() == static_cast<std::size_t>(seq_u.frames()),
          "cross_view_epipolar_lines: need one matrix per frame");
  EpipolarLineSet out(seq_u.frames(), seq_u.joints());
  for (int t = 0; t < seq_u.frames(); ++t) {
    for (int k = 0; k < seq_u.joints(); ++k) {
      if (!seq_u.visible(t, k)) {
        continue;
      }
      out.at(t, k) =
          normalize_line(fs[t].m * Vec3(seq_u.at(t, k).x(), seq_u.at(t, k).y(), 1.0));
    }
  }
  return out;
}

struct LineResidual {
  double loss = 0.0;
  std::vector<double> residuals;  // signed a x + b y + c, zero where skipped
  std::vector<Vec2> gradient;     // d loss / d keypoint
  int counted = 0;
};

/// Sum of point-line distances |a x + b y + c| over valid lines and visible
/// keypoints, with its (sub)gradient sign(r) * (a, b).
inline LineResidual point_line_residual(const EpipolarLineSet& lines, const KeypointSeq2D& seq) {
  if (lines.frames() != seq.frames() || lines.joints() != seq.joints()) {
    throw std::invalid_argument("point_line_residual: shape mismatch");
  }
  LineResidual out;
  out.residuals.assign(seq.size(), 0.0);
  out.gradient.assign(seq.size(), Vec2::Zero());
  std::size_t i = 0;
  for (int t = 0; t < seq.frames(); ++t) {
    for (int k = 0; k < seq.joints(); ++k, ++i) {
      if (!lines.valid(t, k) || !seq.visible(t, k)) {
        continue;
      }
      const Vec3& l = lines.at(t, k);
      const double r = l.x() * seq.at(t, k).x() + l.y() * seq.at(t, k).y() + l.z();
      out.residuals[i] = r;
      out.loss += std::abs(r);
      out.gradient[i] = sign(r) * l.head<2>();
      ++out.counted;
    }
  }
  return out;
}

/// Maps a pixel-space line into canvas units, where
/// u = (x - cx) / (w / 2) and v = (y - cy) / (h / 2).
inline Vec3 line_to_canvas(const Vec3& l, const CameraIntrinsics& intr) {
  if (l.head<2>().squaredNorm() == 0.0) {
    return Vec3::Zero();
  }
  const Vec3 c(l.x() * intr.width / 2.0, l.y() * intr.height / 2.0,
               l.x() * intr.cx + l.y() * intr.cy + l.z());
  return normalize_line(c);
}

inline EpipolarLineSet lines_to_canvas(const EpipolarLineSet& lines, const CameraIntrinsics& intr) {
  EpipolarLineSet out(lines.frames(), lines.joints());
  for (int t = 0; t < lines.frames(); ++t) {
    for (int k = 0; k < lines.joints(); ++k) {
      out.at(t, k) = line_to_canvas(lines.at(t, k), intr);
    }
  }
  return out;
}

/// The eight fixed training epipoles: four image corners, the top, left and
/// right edge midpoints, and a horizontal direction at infinity.
inline std::vector<Vec3> epipole_bank(const CameraIntrinsics& intr) {
  const double w = intr.width;
  const double h = intr.height;
  return {
      {0, 0, 1},      {w, 0, 1},     {0, h, 1},     {w, h, 1},
      {w / 2, 0, 1},  {0, h / 2, 1}, {w, h / 2, 1}, {1, 0, 0},
  };
}

}  // namespace motionlift
