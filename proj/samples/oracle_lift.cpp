// Lifts one synthetic view to four with an analytic denoiser whose mode in
// each lifted view is the true projection, then triangulates.
//
//   ./oracle_lift [seed]

#include <cstdio>
#include <cstdlib>
#include <numbers>

#include "motionlift/metrics.hpp"
#include "motionlift/sds.hpp"
#include "motionlift/synth.hpp"
#include "motionlift/triangulate.hpp"

using namespace motionlift;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  const int frames = 16, views = 4;
  const auto intr = CameraIntrinsics::centered(1000, 1000);
  const auto skel = SkeletonSpec::coco17();

  Rng rng(seed);
  const auto params = ToyMotionParams::random(rng);
  const Seq3D truth = toy_motion(params, frames);
  const Vec3 target = toy_root(params, 0).hips;
  const CameraExtrinsic base = orbit_camera(target, 2.0 * std::numbers::pi * uniform01(rng), 4.5, 1.4);
  const auto camera = apply_relative_motion(
      generate_predefined({CameraMode::kMoveRight, 0.5, false, false}, frames, intr), base);

  MultiViewState state = init_multiview_state(project_sequence(truth, camera), camera, skel, views,
                                              target, (base.center() - target).norm());

  const NoiseSchedule sched = make_schedule(1000);
  const CanvasMap canvas{intr};
  std::vector<VecX> modes(views);
  for (int v = 1; v < views; ++v) {
    KeypointSeq2D c = project_sequence(truth, state.cameras[v]);
    c.set_flat(canvas.to_canvas(c));
    modes[v] = to_decomposed_layout(c, skel, Vec2::Zero()).flat();
  }
  const ViewDenoiser denoiser = [&](const VecX& xn, int n, int v) {
    return analytic_gaussian_denoiser(xn, n, sched, modes[v], 1e-4);
  };

  const MultiViewState lifted = lift_single_to_multi(state, denoiser, sched, LiftConfig{});
  std::vector<KeypointSeq2D> seqs;
  for (int v = 0; v < views; ++v) seqs.push_back(lifted.global(v));
  const auto tri = triangulate_sequence(seqs, lifted.cameras);

  std::printf("line loss      %.3f px/frame\n", lifted.line_loss_history.back() / frames);
  std::printf("constrained    %s\n", tri.all_constrained() ? "all joints" : "some joints flagged");
  std::printf("MPJPE          %.3f mm\n", mpjpe(tri.points, truth));
  std::printf("PA-MPJPE       %.3f mm\n", pa_mpjpe(tri.points, truth));
  return 0;
}
