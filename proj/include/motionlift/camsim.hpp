#pragma once

// Predefined camera-motion modes, ring views for multi-view synthesis and
// training-time camera sampling.

#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "motionlift/camera.hpp"

namespace motionlift {

enum class CameraMode { kZoomIn, kZoomOut, kMoveLeft, kMoveRight, kRotateCw, kRotateCcw };

inline const char* to_string(CameraMode m) {
  switch (m) {
    case CameraMode::kZoomIn: return "zoom_in";
    case CameraMode::kZoomOut: return "zoom_out";
    case CameraMode::kMoveLeft: return "move_left";
    case CameraMode::kMoveRight: return "move_right";
    case CameraMode::kRotateCw: return "rotate_cw";
    case CameraMode::kRotateCcw: return "rotate_ccw";
  }
  return "unknown";
}

struct PredefinedMode {
  CameraMode kind = CameraMode::kMoveRight;
  double max_displacement = 1.0;  // meters, or radians for the rotate modes
  bool return_to_origin = false;
  bool track_pelvis = false;

  bool is_rotation() const {
    return kind == CameraMode::kRotateCw || kind == CameraMode::kRotateCcw;
  }
};

/// Displacement fraction at frame t: linear ramp, or a triangle that comes
/// back to zero at the last frame.
inline double displacement_profile(int t, int frames, bool return_to_origin) {
  const double s = static_cast<double>(t) / (frames - 1);
  return return_to_origin ? 1.0 - std::abs(2.0 * s - 1.0) : s;
}

/// Up direction of the frame-0 camera, in its own coordinates.
inline const Vec3 kCameraUp{0.0, -1.0, 0.0};

/// Generates a camera trajectory relative to its first frame.
///
/// Translations move the camera center along the frame-0 camera axes
/// (zoom: +-z, move: +-x). Rotations pan about the frame-0 vertical axis;
/// clockwise is seen from above. With `track_pelvis`, every frame is re-aimed at
/// `pelvis[t]` (frame-0 camera coordinates) and the result re-normalized so
/// frame 0 stays the identity.
inline CameraTrajectory generate_predefined(const PredefinedMode& mode, int frames,
                                            const CameraIntrinsics& intr,
                                            const std::optional<std::vector<Vec3>>& pelvis = {}) {
  require(frames >= 2, "generate_predefined: need at least two frames");
  require(mode.max_displacement > 0.0, "generate_predefined: max_displacement must be positive");
  if (mode.track_pelvis) {
    if (!pelvis || pelvis->size() != static_cast<std::size_t>(frames)) {
      throw std::invalid_argument("generate_predefined: track_pelvis needs a pelvis track of length T");
    }
  }
  CameraTrajectory traj;
  traj.intrinsics = intr;
  for (int t = 0; t < frames; ++t) {
    const double d = mode.max_displacement * displacement_profile(t, frames, mode.return_to_origin);
    Vec3 center = Vec3::Zero();
    Mat3 cam_to_world = Mat3::Identity();
    switch (mode.kind) {
      case CameraMode::kZoomIn: center.z() = d; break;
      case CameraMode::kZoomOut: center.z() = -d; break;
      case CameraMode::kMoveLeft: center.x() = -d; break;
      case CameraMode::kMoveRight: center.x() = d; break;
      case CameraMode::kRotateCw: cam_to_world = axis_angle(kCameraUp, -d); break;
      case CameraMode::kRotateCcw: cam_to_world = axis_angle(kCameraUp, d); break;
    }
    CameraExtrinsic e;
    if (mode.track_pelvis) {
      e = look_at(center, (*pelvis)[t], kCameraUp);
    } else {
      e.rotation = cam_to_world.transpose();
      e.translation = -e.rotation * center;
    }
    traj.extrinsics.push_back(e);
  }
  return normalize_trajectory(traj);
}

/// Draws a mode with randomized range and flags.
///
/// Translation modes use U(0.5, 2.0) m, rotation modes U(pi/6, pi/2) rad;
/// return and tracking flags are fair coin flips.
inline PredefinedMode random_predefined_mode(Rng& rng) {
  PredefinedMode m;
  m.kind = static_cast<CameraMode>(uniform_int(rng, 0, 5));
  if (m.is_rotation()) {
    m.max_displacement = std::uniform_real_distribution<double>(std::numbers::pi / 6,
                                                                std::numbers::pi / 2)(rng);
  } else {
    m.max_displacement = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
  }
  m.return_to_origin = uniform01(rng) < 0.5;
  m.track_pelvis = uniform01(rng) < 0.5;
  return m;
}

/// Places V-1 cameras on a ring around `subject_center`.
///
/// Ring camera k sits at azimuth 2 pi k / V (about the vertical axis through
/// the center, measured from the input camera's frame-0 position), at distance
/// `radius`, aimed at the center. Each ring camera then undergoes the input
/// camera's per-frame motion expressed in its own camera frame.
inline std::vector<CameraTrajectory> ring_views(const CameraTrajectory& input, int views,
                                                const Vec3& subject_center, double radius,
                                                const Vec3& up = Vec3(0, 1, 0)) {
  require(views >= 2, "ring_views: need V >= 2");
  require(input.frames() >= 1, "ring_views: empty input trajectory");
  if (!(radius > 0.0)) {
    throw std::invalid_argument("ring_views: radius must be positive");
  }
  const Vec3 axis = up.normalized();
  const Vec3 c0 = input[0].center();
  Vec3 offset = c0 - subject_center;
  if (offset.norm() < 1e-12) {
    throw GeometryError("ring_views: input camera coincides with the subject center");
  }
  offset.normalize();

  std::vector<CameraTrajectory> out;
  for (int k = 1; k < views; ++k) {
    const double azimuth = 2.0 * std::numbers::pi * k / views;
    const Vec3 eye = subject_center + radius * (axis_angle(axis, azimuth) * offset);
    const CameraExtrinsic base = look_at(eye, subject_center, axis);
    CameraTrajectory traj;
    traj.intrinsics = input.intrinsics;
    for (int t = 0; t < input.frames(); ++t) {
      traj.extrinsics.push_back(relative_transform(input[0], input[t]).compose(base));
    }
    out.push_back(std::move(traj));
  }
  return out;
}

/// Default subject center: back-project the frame-0 hip midpoint pixel at
/// `depth` meters in front of the camera.
inline Vec3 subject_center_from_pixel(const CameraExtrinsic& cam, const CameraIntrinsics& intr,
                                      const Vec2& pixel, double depth) {
  const Vec3 p_cam((pixel.x() - intr.cx) / intr.fx * depth, (pixel.y() - intr.cy) / intr.fy * depth,
                   depth);
  return cam.inverse().apply(p_cam);
}

enum class Split { kTrain, kTest };

struct CameraBankEntry {
  std::string name;
  CameraTrajectory trajectory;
  Split split = Split::kTrain;
};

struct CameraBank {
  std::vector<CameraBankEntry> entries;

  std::vector<const CameraBankEntry*> split(Split s) const {
    std::vector<const CameraBankEntry*> out;
    for (const auto& e : entries) {
      if (e.split == s) {
        out.push_back(&e);
      }
    }
    return out;
  }

  /// Throws if a name or an identical trajectory appears in both splits.
  void validate() const {
    std::set<std::string> names;
    for (const auto& e : entries) {
      if (!names.insert(e.name).second) {
        throw std::invalid_argument("CameraBank: duplicate name " + e.name);
      }
    }
    for (const auto* a : split(Split::kTrain)) {
      for (const auto* b : split(Split::kTest)) {
        if (a->trajectory == b->trajectory) {
          throw std::invalid_argument("CameraBank: trajectory shared by train and test: " +
                                      a->name + " / " + b->name);
        }
      }
    }
  }
};

/// Crops a random window of length T, or pads by holding the last frame.
inline CameraTrajectory crop_or_pad(const CameraTrajectory& traj, int frames, Rng& rng) {
  CameraTrajectory out;
  out.intrinsics = traj.intrinsics;
  const int n = traj.frames();
  const int start = n > frames ? uniform_int(rng, 0, n - frames) : 0;
  for (int t = 0; t < frames; ++t) {
    out.extrinsics.push_back(traj[std::min(start + t, n - 1)]);
  }
  return out;
}

struct SampledCamera {
  CameraTrajectory trajectory;  // normalized
  bool predefined = false;
  std::string source;
};

/// Picks a predefined mode with probability `predefined_fraction`, otherwise a
/// uniformly drawn train-split trajectory from the bank.
///
/// `pelvis` (frame-0 camera coordinates) is used only when the drawn mode
/// tracks the pelvis; without it tracking is switched off.
inline SampledCamera sample_training_camera(const CameraBank& bank, double predefined_fraction,
                                            int frames, const CameraIntrinsics& intr, Rng& rng,
                                            const std::optional<std::vector<Vec3>>& pelvis = {}) {
  require(predefined_fraction >= 0.0 && predefined_fraction <= 1.0,
          "sample_training_camera: fraction must lie in [0, 1]");
  const auto train = bank.split(Split::kTrain);
  if (train.empty()) {
    throw std::invalid_argument("sample_training_camera: bank has no train trajectories");
  }
  SampledCamera out;
  if (uniform01(rng) < predefined_fraction) {
    PredefinedMode mode = random_predefined_mode(rng);
    if (!pelvis) {
      mode.track_pelvis = false;
    }
    out.trajectory = generate_predefined(mode, std::max(frames, 2), intr, pelvis);
    out.trajectory.extrinsics.resize(frames);
    out.predefined = true;
    out.source = to_string(mode.kind);
  } else {
    const auto* entry = train[uniform_int(rng, 0, static_cast<int>(train.size()) - 1)];
    out.trajectory = normalize_trajectory(crop_or_pad(entry->trajectory, frames, rng));
    out.source = entry->name;
  }
  return out;
}

}  // namespace motionlift
