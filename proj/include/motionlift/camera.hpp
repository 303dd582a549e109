#pragma once

// Pinhole cameras and camera trajectories.
//
// Extrinsics map world to camera: x_cam = R * x_world + t. Camera axes follow
// the usual image convention (x right, y down, z forward).

#include <algorithm>
#include <array>
#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "motionlift/common.hpp"

namespace motionlift {

struct CameraIntrinsics {
  double fx = 1000.0;
  double fy = 1000.0;
  double cx = 500.0;
  double cy = 500.0;
  double width = 1000.0;
  double height = 1000.0;

  void validate() const {
    require(fx > 0 && fy > 0, "CameraIntrinsics: focal lengths must be positive");
    require(width > 0 && height > 0, "CameraIntrinsics: image size must be positive");
  }

  Vec2 center() const { return {cx, cy}; }

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  Mat3 inverse_matrix() const {
    Mat3 k;
    k << 1.0 / fx, 0, -cx / fx, 0, 1.0 / fy, -cy / fy, 0, 0, 1;
    return k;
  }

  /// Principal point at the image center, fx = fy = focal.
  static CameraIntrinsics centered(double width, double height, double focal = 1000.0) {
    return {focal, focal, width / 2.0, height / 2.0, width, height};
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

struct CameraExtrinsic {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static CameraExtrinsic identity() { return {}; }

  Vec3 apply(const Vec3& x_world) const { return rotation * x_world + translation; }

  /// Camera center in world coordinates.
  Vec3 center() const { return -rotation.transpose() * translation; }

  CameraExtrinsic inverse() const {
    return {rotation.transpose(), -rotation.transpose() * translation};
  }

  /// (*this) after `first`: x -> this(first(x)).
  CameraExtrinsic compose(const CameraExtrinsic& first) const {
    return {rotation * first.rotation, rotation * first.translation + translation};
  }

  double orthonormality_error() const {
    return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  }

  void validate() const {
    if (!rotation.allFinite() || !translation.allFinite()) {
      throw NumericalError("CameraExtrinsic: non-finite entries");
    }
    if (orthonormality_error() >= 1e-6 || rotation.determinant() <= 0.0) {
      throw std::invalid_argument("CameraExtrinsic: rotation is not in SO(3)");
    }
  }

  /// Row-major [R | t], 12 numbers.
  std::array<double, 12> to_row_major() const {
    std::array<double, 12> v{};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        v[4 * r + c] = rotation(r, c);
      }
      v[4 * r + 3] = translation[r];
    }
    return v;
  }

  static CameraExtrinsic from_row_major(std::span<const double> v) {
    require(v.size() == 12, "CameraExtrinsic: expected 12 numbers");
    CameraExtrinsic e;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        e.rotation(r, c) = v[4 * r + c];
      }
      e.translation[r] = v[4 * r + 3];
    }
    return e;
  }

  bool operator==(const CameraExtrinsic& o) const {
    return rotation == o.rotation && translation == o.translation;
  }
};

struct CameraTrajectory {
  std::vector<CameraExtrinsic> extrinsics;
  CameraIntrinsics intrinsics;

  int frames() const { return static_cast<int>(extrinsics.size()); }
  const CameraExtrinsic& operator[](int t) const { return extrinsics[t]; }

  void validate() const {
    intrinsics.validate();
    require(!extrinsics.empty(), "CameraTrajectory: empty");
    for (const auto& e : extrinsics) {
      e.validate();
    }
  }

  bool operator==(const CameraTrajectory&) const = default;
};

inline constexpr double kDefaultZNear = 1e-6;

struct Projection {
  Vec2 pixel = Vec2::Zero();
  bool valid = false;
};

/// Pinhole projection of a camera-frame point.
inline Projection project_camera_point(const Vec3& p_cam, const CameraIntrinsics& intr,
                                       double z_near = kDefaultZNear) {
  if (!(p_cam.z() > z_near)) {
    return {};
  }
  return {{intr.cx + intr.fx * p_cam.x() / p_cam.z(), intr.cy + intr.fy * p_cam.y() / p_cam.z()},
          true};
}

inline Projection project(const Vec3& x_world, const CameraExtrinsic& ext,
                          const CameraIntrinsics& intr, double z_near = kDefaultZNear) {
  return project_camera_point(ext.apply(x_world), intr, z_near);
}

inline std::vector<Projection> project(std::span<const Vec3> points, const CameraExtrinsic& ext,
                                       const CameraIntrinsics& intr,
                                       double z_near = kDefaultZNear) {
  std::vector<Projection> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    out.push_back(project(p, ext, intr, z_near));
  }
  return out;
}

/// Transform taking camera-a coordinates to camera-b coordinates.
inline CameraExtrinsic relative_transform(const CameraExtrinsic& a, const CameraExtrinsic& b) {
  const Mat3 r = b.rotation * a.rotation.transpose();
  return {r, b.translation - r * a.translation};
}

/// Re-expresses every frame relative to frame 0, so frame 0 becomes identity
/// and the world frame becomes the frame-0 camera frame.
inline CameraTrajectory normalize_trajectory(const CameraTrajectory& traj) {
  require(traj.frames() >= 1, "normalize_trajectory: empty trajectory");
  CameraTrajectory out;
  out.intrinsics = traj.intrinsics;
  out.extrinsics.reserve(traj.extrinsics.size());
  const CameraExtrinsic& first = traj.extrinsics.front();
  for (const auto& e : traj.extrinsics) {
    out.extrinsics.push_back(relative_transform(first, e));
  }
  out.extrinsics.front() = CameraExtrinsic::identity();
  return out;
}

/// Look-at extrinsic with the optical axis through `target` and the image
/// y axis pointing along -up. Zero roll.
inline CameraExtrinsic look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-12) {
    // Looking straight along `up`; any perpendicular works.
    x = z.unitOrthogonal();
  }
  x.normalize();
  const Vec3 y = z.cross(x);
  CameraExtrinsic e;
  e.rotation.row(0) = x.transpose();
  e.rotation.row(1) = y.transpose();
  e.rotation.row(2) = z.transpose();
  e.translation = -e.rotation * eye;
  return e;
}

/// Geodesic angle between two rotations.
inline double rotation_angle(const Mat3& a, const Mat3& b) {
  const Eigen::Quaterniond q(Mat3(a.transpose() * b));
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

/// Rotation by `angle` about the unit `axis`.
inline Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace motionlift
