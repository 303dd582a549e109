#pragma once

// Synthetic 3D motion, object tracks and projection, for desk-scale data
// generation and end-to-end fixtures.
//
// World frame is y-up with the ground at y = 0. The body faces +z at zero
// heading, so its left side is +x.

#include <array>
#include <numbers>
#include <vector>

#include "motionlift/camsim.hpp"
#include "motionlift/motion.hpp"

namespace motionlift {

/// COCO-17 rest pose relative to the hip midpoint, meters.
inline const std::array<Vec3, 17>& coco17_rest_pose() {
  static const std::array<Vec3, 17> pose = {
      Vec3(0.00, 0.62, 0.10),   Vec3(0.03, 0.66, 0.08),   Vec3(-0.03, 0.66, 0.08),
      Vec3(0.07, 0.64, 0.00),   Vec3(-0.07, 0.64, 0.00),  Vec3(0.18, 0.45, 0.00),
      Vec3(-0.18, 0.45, 0.00),  Vec3(0.22, 0.18, 0.00),   Vec3(-0.22, 0.18, 0.00),
      Vec3(0.24, -0.07, 0.05),  Vec3(-0.24, -0.07, 0.05), Vec3(0.10, 0.00, 0.00),
      Vec3(-0.10, 0.00, 0.00),  Vec3(0.10, -0.45, 0.00),  Vec3(-0.10, -0.45, 0.00),
      Vec3(0.10, -0.88, 0.00),  Vec3(-0.10, -0.88, 0.00),
  };
  return pose;
}

struct ToyMotionParams {
  double fps = 30.0;
  double speed = 1.0;          // m/s
  double heading = 0.0;        // rad about +y, 0 faces +z
  double turn_rate = 0.0;      // rad/s
  double stride_hz = 1.0;      // gait cycles per second
  double swing = 0.4;          // leg swing amplitude, rad
  double pelvis_height = 0.9;
  Vec3 start = Vec3::Zero();   // ground point under the hips at t = 0
  double phase = 0.0;

  static ToyMotionParams random(Rng& rng) {
    ToyMotionParams p;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    p.speed = 1.5 * u(rng);
    p.heading = 2.0 * std::numbers::pi * u(rng);
    p.turn_rate = 0.6 * (u(rng) - 0.5);
    p.stride_hz = 0.7 + 0.8 * u(rng);
    p.swing = 0.2 + 0.4 * u(rng);
    p.pelvis_height = 0.85 + 0.1 * u(rng);
    p.start = Vec3(u(rng) - 0.5, 0.0, u(rng) - 0.5);
    p.phase = 2.0 * std::numbers::pi * u(rng);
    return p;
  }
};

/// Per-frame heading and hip-midpoint position of a toy motion.
struct ToyRoot {
  double heading = 0.0;
  Vec3 hips = Vec3::Zero();
};

inline ToyRoot toy_root(const ToyMotionParams& p, int t) {
  const double s = t / p.fps;
  ToyRoot r;
  if (std::abs(p.turn_rate) > 1e-12) {
    r.heading = p.heading + p.turn_rate * s;
    const double k = p.speed / p.turn_rate;
    r.hips = p.start + Vec3(k * (-std::cos(r.heading) + std::cos(p.heading)), 0.0,
                            k * (std::sin(r.heading) - std::sin(p.heading)));
  } else {
    r.heading = p.heading;
    r.hips = p.start + p.speed * s * Vec3(std::sin(p.heading), 0.0, std::cos(p.heading));
  }
  const double phi = 2.0 * std::numbers::pi * p.stride_hz * s + p.phase;
  r.hips.y() = p.pelvis_height + 0.02 * std::cos(2.0 * phi);
  return r;
}

/// Walking stick figure on the COCO-17 layout.
inline Seq3D toy_motion(const ToyMotionParams& p, int frames) {
  require(frames >= 1, "toy_motion: need at least one frame");
  const auto& rest = coco17_rest_pose();
  Seq3D out(frames, 17);
  for (int t = 0; t < frames; ++t) {
    const ToyRoot root = toy_root(p, t);
    const double phi = 2.0 * std::numbers::pi * p.stride_hz * t / p.fps + p.phase;
    const double swing = p.swing * std::sin(phi);
    const Mat3 yaw = axis_angle(Vec3::UnitY(), root.heading);
    std::array<Vec3, 17> local = rest;
    // Legs rotate about the hip's x axis, arms about the shoulder's, in
    // opposite phase.
    auto swing_limb = [&](std::initializer_list<int> joints, int pivot, double angle) {
      const Mat3 r = axis_angle(Vec3::UnitX(), angle);
      for (int j : joints) {
        local[j] = rest[pivot] + r * (rest[j] - rest[pivot]);
      }
    };
    swing_limb({13, 15}, 11, -swing);
    swing_limb({14, 16}, 12, swing);
    swing_limb({7, 9}, 5, 0.6 * swing);
    swing_limb({8, 10}, 6, -0.6 * swing);
    for (int j = 0; j < 17; ++j) {
      out.at(t, j) = root.hips + yaw * local[j];
    }
  }
  return out;
}

/// Projects every frame through its camera. Entries behind the camera keep a
/// zero coordinate and are marked invisible.
inline KeypointSeq2D project_sequence(const Seq3D& seq, const CameraTrajectory& traj) {
  require(traj.frames() == seq.frames, "project_sequence: camera length must equal T");
  KeypointSeq2D out(seq.frames, seq.joints);
  for (int t = 0; t < seq.frames; ++t) {
    for (int j = 0; j < seq.joints; ++j) {
      const Projection p = project(seq.at(t, j), traj[t], traj.intrinsics);
      out.at(t, j) = p.valid ? p.pixel : Vec2::Zero();
      out.set_visible(t, j, p.valid);
    }
  }
  return out;
}

/// Canonical object keypoints: the 8 corners of an axis-aligned box centered
/// on the origin.
inline std::vector<Vec3> box_corners(const Vec3& size) {
  std::vector<Vec3> out;
  for (int i = 0; i < 8; ++i) {
    out.emplace_back((i & 1 ? 0.5 : -0.5) * size.x(), (i & 2 ? 0.5 : -0.5) * size.y(),
                     (i & 4 ? 0.5 : -0.5) * size.z());
  }
  return out;
}

struct ToyObjectTrack {
  std::vector<Mat3> rotation;
  std::vector<Vec3> translation;
  double scale = 1.0;
  Seq3D keypoints;  // s R p + t per frame
};

/// A carried object: held between the wrists, turning with the body and
/// rocking slowly about its own axis.
inline ToyObjectTrack toy_object_track(const Seq3D& human, const ToyMotionParams& p,
                                       const std::vector<Vec3>& canonical, double scale) {
  require(human.joints == 17, "toy_object_track: expects the COCO-17 layout");
  ToyObjectTrack tr;
  tr.scale = scale;
  tr.keypoints = Seq3D(human.frames, static_cast<int>(canonical.size()));
  for (int t = 0; t < human.frames; ++t) {
    const ToyRoot root = toy_root(p, t);
    const Mat3 r = axis_angle(Vec3::UnitY(), root.heading) *
                   axis_angle(Vec3::UnitX(), 0.3 * std::sin(0.5 * t / p.fps + p.phase));
    const Vec3 fwd(std::sin(root.heading), 0.0, std::cos(root.heading));
    const Vec3 c = 0.5 * (human.at(t, 9) + human.at(t, 10)) + 0.15 * fwd;
    tr.rotation.push_back(r);
    tr.translation.push_back(c);
    for (std::size_t i = 0; i < canonical.size(); ++i) {
      tr.keypoints.at(t, static_cast<int>(i)) = scale * (r * canonical[i]) + c;
    }
  }
  return tr;
}

/// Places a camera `distance` meters from `target` at the given azimuth and
/// height above the ground, aimed at the target.
inline CameraExtrinsic orbit_camera(const Vec3& target, double azimuth, double distance,
                                    double height) {
  const Vec3 eye(target.x() + distance * std::sin(azimuth), height,
                 target.z() + distance * std::cos(azimuth));
  return look_at(eye, target, Vec3::UnitY());
}

/// World-frame trajectory: the normalized relative motion `rel` applied to the
/// frame-0 camera `base`.
inline CameraTrajectory apply_relative_motion(const CameraTrajectory& rel,
                                              const CameraExtrinsic& base) {
  CameraTrajectory out;
  out.intrinsics = rel.intrinsics;
  for (const auto& e : rel.extrinsics) {
    out.extrinsics.push_back(e.compose(base));
  }
  return out;
}

/// A hand-held style trajectory for the camera bank: slow drift plus a small
/// periodic wobble, expressed relative to frame 0.
inline CameraTrajectory random_handheld_trajectory(int frames, const CameraIntrinsics& intr,
                                                   Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec3 drift(0.6 * u(rng), 0.1 * u(rng), 0.6 * u(rng));
  const Vec3 spin(0.05 * u(rng), 0.4 * u(rng), 0.05 * u(rng));
  const double wobble = 0.02 * (1.0 + u(rng));
  const double freq = 0.5 + 0.5 * (1.0 + u(rng));
  CameraTrajectory traj;
  traj.intrinsics = intr;
  for (int t = 0; t < frames; ++t) {
    const double s = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
    const Vec3 center = s * drift + wobble * Vec3(std::sin(6.0 * freq * s), std::cos(5.0 * freq * s) - 1.0, 0.0);
    const Vec3 w = s * spin;
    const Mat3 cam_to_world = w.norm() > 0 ? axis_angle(w, w.norm()) : Mat3::Identity();
    CameraExtrinsic e;
    e.rotation = cam_to_world.transpose();
    e.translation = -e.rotation * center;
    traj.extrinsics.push_back(e);
  }
  return normalize_trajectory(traj);
}

}  // namespace motionlift
