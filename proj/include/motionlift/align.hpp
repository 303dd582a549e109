#pragma once

// Closed-form rigid and similarity alignment of corresponding 3D point sets.

#include <vector>

#include <Eigen/SVD>

#include "motionlift/common.hpp"

namespace motionlift {

/// dst ~ scale * rotation * src + translation.
struct Similarity {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;
  double rms = 0.0;  // residual after alignment

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

/// Least-squares alignment of `src` onto `dst` (Kabsch, or Umeyama when
/// `with_scale`). The rotation always has det +1. Throws GeometryError for
/// fewer than three points or a collinear source.
inline Similarity align_points(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                               bool with_scale) {
  require(src.size() == dst.size(), "align_points: point counts differ");
  if (src.size() < 3) {
    throw GeometryError("align_points: need at least three correspondences");
  }
  const double n = static_cast<double>(src.size());
  Vec3 mu_s = Vec3::Zero();
  Vec3 mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;
  Mat3 cov = Mat3::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    cov += (dst[i] - mu_d) * (src[i] - mu_s).transpose();
    var_s += (src[i] - mu_s).squaredNorm();
  }
  cov /= n;
  var_s /= n;

  Mat3 spread = Mat3::Zero();
  for (const auto& p : src) spread += (p - mu_s) * (p - mu_s).transpose();
  const Vec3 sv = Eigen::JacobiSVD<Mat3>(spread).singularValues();
  if (!(sv[1] > 1e-12 * std::max(sv[0], 1e-300))) {
    throw GeometryError("align_points: source points are collinear");
  }

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2, 2) = -1.0;
  }
  Similarity out;
  out.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  if (with_scale) {
    out.scale = (svd.singularValues().asDiagonal() * d).trace() / var_s;
  }
  out.translation = mu_d - out.scale * out.rotation * mu_s;
  double sq = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) sq += (out.apply(src[i]) - dst[i]).squaredNorm();
  out.rms = std::sqrt(sq / n);
  return out;
}

}  // namespace motionlift
