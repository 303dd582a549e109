#pragma once

// Multi-view triangulation: linear (DLT) initialization followed by
// Gauss-Newton on squared pixel reprojection errors.

#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "motionlift/camera.hpp"
#include "motionlift/motion.hpp"

namespace motionlift {

/// One view of a point: pixel observation and the camera that saw it.
struct Observation {
  Vec2 pixel;
  const CameraExtrinsic* extrinsic = nullptr;
  const CameraIntrinsics* intrinsics = nullptr;
};

struct TriangulationConfig {
  int iterations = 20;             // Gauss-Newton iterations
  double min_angle_deg = 0.1;      // below this the point is under-constrained
  double huber_px = 0.0;           // 0 disables the robust loss
  double tolerance = 1e-12;        // stop when the update norm falls below this
};

struct PointEstimate {
  Vec3 point = Vec3::Zero();
  bool constrained = false;
  double rms_px = 0.0;  // reprojection RMS over the observations
  int observations = 0;
  double max_angle_deg = 0.0;
};

/// Largest angle between viewing rays from the camera centers to `x`.
inline double max_triangulation_angle(const std::vector<Observation>& obs, const Vec3& x) {
  double best = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Vec3 a = (x - obs[i].extrinsic->center()).normalized();
    for (std::size_t j = i + 1; j < obs.size(); ++j) {
      const Vec3 b = (x - obs[j].extrinsic->center()).normalized();
      best = std::max(best, std::atan2(a.cross(b).norm(), a.dot(b)));
    }
  }
  return best * 180.0 / std::numbers::pi;
}

/// Homogeneous linear triangulation. Rows are scaled per view so each
/// observation contributes with comparable weight.
inline Eigen::Vector4d triangulate_dlt(const std::vector<Observation>& obs) {
  Eigen::MatrixXd a(2 * obs.size(), 4);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    Eigen::Matrix<double, 3, 4> p;
    p.leftCols<3>() = obs[i].intrinsics->matrix() * obs[i].extrinsic->rotation;
    p.col(3) = obs[i].intrinsics->matrix() * obs[i].extrinsic->translation;
    const Eigen::RowVector4d r0 = obs[i].pixel.x() * p.row(2) - p.row(0);
    const Eigen::RowVector4d r1 = obs[i].pixel.y() * p.row(2) - p.row(1);
    a.row(2 * i) = r0 / std::max(r0.norm(), 1e-300);
    a.row(2 * i + 1) = r1 / std::max(r1.norm(), 1e-300);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  return svd.matrixV().col(3);
}

namespace detail {

inline double reprojection_rms(const std::vector<Observation>& obs, const Vec3& x) {
  double sum = 0.0;
  for (const auto& o : obs) {
    const Projection p = project(x, *o.extrinsic, *o.intrinsics);
    if (!p.valid) {
      return std::numeric_limits<double>::infinity();
    }
    sum += (p.pixel - o.pixel).squaredNorm();
  }
  return std::sqrt(sum / obs.size());
}

}  // namespace detail

/// Triangulates one point. Never throws for geometric degeneracy; the
/// estimate comes back with `constrained == false` instead.
inline PointEstimate triangulate_point(const std::vector<Observation>& obs,
                                       const TriangulationConfig& cfg = {}) {
  PointEstimate est;
  est.observations = static_cast<int>(obs.size());
  if (obs.size() < 2) {
    return est;
  }
  const Eigen::Vector4d h = triangulate_dlt(obs);
  if (std::abs(h[3]) < 1e-12 || !h.allFinite()) {
    return est;  // point at infinity
  }
  Vec3 x = h.head<3>() / h[3];
  for (int it = 0; it < cfg.iterations; ++it) {
    Mat3 jtj = Mat3::Zero();
    Vec3 jtr = Vec3::Zero();
    bool ok = true;
    for (const auto& o : obs) {
      const Vec3 pc = o.extrinsic->apply(x);
      if (!(pc.z() > kDefaultZNear)) {
        ok = false;
        break;
      }
      const double iz = 1.0 / pc.z();
      const Vec2 proj(o.intrinsics->cx + o.intrinsics->fx * pc.x() * iz,
                      o.intrinsics->cy + o.intrinsics->fy * pc.y() * iz);
      const Vec2 r = proj - o.pixel;
      Eigen::Matrix<double, 2, 3> dp;
      dp << o.intrinsics->fx * iz, 0, -o.intrinsics->fx * pc.x() * iz * iz, 0,
          o.intrinsics->fy * iz, -o.intrinsics->fy * pc.y() * iz * iz;
      const Eigen::Matrix<double, 2, 3> j = dp * o.extrinsic->rotation;
      double w = 1.0;
      if (cfg.huber_px > 0.0 && r.norm() > cfg.huber_px) {
        w = cfg.huber_px / r.norm();
      }
      jtj += w * j.transpose() * j;
      jtr += w * j.transpose() * r;
    }
    if (!ok) {
      break;
    }
    const Vec3 dx = jtj.ldlt().solve(-jtr);
    if (!dx.allFinite()) {
      break;
    }
    x += dx;
    if (dx.norm() < cfg.tolerance * std::max(1.0, x.norm())) {
      break;
    }
  }
  est.point = x;
  est.rms_px = detail::reprojection_rms(obs, x);
  est.max_angle_deg = max_triangulation_angle(obs, x);
  est.constrained = std::isfinite(est.rms_px) && est.max_angle_deg >= cfg.min_angle_deg;
  return est;
}

struct TriangulationResult {
  Seq3D points;
  std::vector<unsigned char> constrained;  // T x J
  std::vector<double> rms_px;              // T x J
  double mean_rms_px = 0.0;                // over constrained entries
  int under_constrained = 0;

  bool all_constrained() const { return under_constrained == 0; }
};

/// Triangulates every joint of every frame from V views. Invisible entries
/// are skipped; joints seen by fewer than two views, or with a triangulation
/// angle below the threshold, are flagged.
inline TriangulationResult triangulate_sequence(const std::vector<KeypointSeq2D>& seqs,
                                                const std::vector<CameraTrajectory>& cams,
                                                const TriangulationConfig& cfg = {}) {
  require(seqs.size() >= 2, "triangulate_sequence: need at least two views");
  require(seqs.size() == cams.size(), "triangulate_sequence: one camera per view");
  const int T = seqs[0].frames();
  const int J = seqs[0].joints();
  for (std::size_t v = 0; v < seqs.size(); ++v) {
    require(seqs[v].frames() == T && seqs[v].joints() == J && cams[v].frames() == T,
            "triangulate_sequence: views disagree on shape");
  }
  TriangulationResult out;
  out.points = Seq3D(T, J);
  out.constrained.assign(static_cast<std::size_t>(T) * J, 0);
  out.rms_px.assign(static_cast<std::size_t>(T) * J, 0.0);
  int good = 0;
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < J; ++j) {
      std::vector<Observation> obs;
      for (std::size_t v = 0; v < seqs.size(); ++v) {
        if (seqs[v].visible(t, j)) {
          obs.push_back({seqs[v].at(t, j), &cams[v][t], &cams[v].intrinsics});
        }
      }
      const PointEstimate e = triangulate_point(obs, cfg);
      const std::size_t i = static_cast<std::size_t>(t) * J + j;
      out.points.at(t, j) = e.point;
      out.constrained[i] = e.constrained ? 1 : 0;
      out.rms_px[i] = std::isfinite(e.rms_px) ? e.rms_px : 0.0;
      if (e.constrained) {
        out.mean_rms_px += e.rms_px;
        ++good;
      } else {
        ++out.under_constrained;
      }
    }
  }
  if (good > 0) {
    out.mean_rms_px /= good;
  }
  return out;
}

}  // namespace motionlift
