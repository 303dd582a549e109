#pragma once

// Shared synthetic fixtures for unit and acceptance tests.

#include <vector>

#include "motionlift/sds.hpp"
#include "motionlift/synth.hpp"
#include "motionlift/training.hpp"

namespace motionlift::fixture {

inline DenoiserShape small_shape(int joints, int hidden = 16, bool cross = false) {
  DenoiserShape s;
  s.joints = joints;
  s.hidden = hidden;
  s.depth = 2;
  s.step_dim = 8;
  s.cross_view = cross;
  return s;
}

/// Toy walking motion seen by an orbiting camera with a predefined motion.
struct ToyView {
  Seq3D motion;
  CameraTrajectory camera;  // world frame
  KeypointSeq2D keypoints;
};

inline ToyView toy_view(int frames, Rng& rng, const CameraIntrinsics& intr) {
  ToyView v;
  const auto params = ToyMotionParams::random(rng);
  v.motion = toy_motion(params, frames);
  const Vec3 target = toy_root(params, 0).hips;
  const CameraExtrinsic base =
      orbit_camera(target, 2.0 * std::numbers::pi * uniform01(rng), 4.0 + 2.0 * uniform01(rng),
                   1.0 + 0.6 * uniform01(rng));
  PredefinedMode mode = random_predefined_mode(rng);
  mode.track_pelvis = false;
  v.camera = apply_relative_motion(generate_predefined(mode, frames, intr), base);
  v.keypoints = project_sequence(v.motion, v.camera);
  return v;
}

/// Hybrid batch: two video items per reprojected one.
inline TrainingBatch toy_batch(int items, int frames, Rng& rng, double drop_rate = 0.0) {
  const auto intr = CameraIntrinsics::centered(1000, 1000);
  const auto bank = epipole_bank(intr);
  TrainingBatch batch;
  batch.skeleton = SkeletonSpec::coco17();
  for (int i = 0; i < items; ++i) {
    const ToyView v = toy_view(frames, rng, intr);
    const DataSource src = i % 3 == 2 ? DataSource::kReprojectedLocal : DataSource::kVideoGlobal;
    const Vec3 e = bank[uniform_int(rng, 0, static_cast<int>(bank.size()) - 1)];
    batch.items.push_back(
        make_training_item(v.keypoints, v.camera, batch.skeleton, src, e, drop_rate, rng));
  }
  return batch;
}

/// Single-view input plus a denoiser whose mode in every ring view is the
/// exact projection of the ground-truth motion.
struct OracleLift {
  Seq3D truth;
  MultiViewState state;
  std::vector<VecX> modes;  // [v] canvas, decomposed; [0] unused
  NoiseSchedule sched = make_schedule(1000);
  double variance = 1e-4;

  ViewDenoiser denoiser() const {
    return [this](const VecX& xn, int n, int v) {
      return analytic_gaussian_denoiser(xn, n, sched, modes[v], variance);
    };
  }
};

inline OracleLift oracle_lift(int frames, int views, std::uint64_t seed) {
  const auto intr = CameraIntrinsics::centered(1000, 1000);
  Rng rng(seed);
  const auto params = ToyMotionParams::random(rng);
  OracleLift o;
  o.truth = toy_motion(params, frames);
  const Vec3 target = toy_root(params, 0).hips;
  const CameraExtrinsic base = orbit_camera(target, 0.7, 4.5, 1.4);
  const auto cam = apply_relative_motion(
      generate_predefined({CameraMode::kMoveRight, 0.5, false, false}, frames, intr), base);
  const auto skel = SkeletonSpec::coco17();
  o.state = init_multiview_state(project_sequence(o.truth, cam), cam, skel, views, target,
                                 (base.center() - target).norm());
  o.modes.assign(views, VecX());
  const CanvasMap canvas{intr};
  for (int v = 1; v < views; ++v) {
    KeypointSeq2D c = project_sequence(o.truth, o.state.cameras[v]);
    c.set_flat(canvas.to_canvas(c));
    o.modes[v] = to_decomposed_layout(c, skel, Vec2::Zero()).flat();
  }
  return o;
}

}  // namespace motionlift::fixture
