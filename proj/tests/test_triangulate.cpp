#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "motionlift/triangulate.hpp"
#include "oracles.hpp"

using namespace motionlift;

namespace {

std::vector<CameraTrajectory> ring_of(int views, int frames, const Vec3& target, Rng& rng) {
  std::vector<CameraTrajectory> cams;
  const double phase = 6.283 * uniform01(rng);
  for (int v = 0; v < views; ++v) {
    CameraTrajectory c;
    c.intrinsics = CameraIntrinsics::centered(1000, 1000);
    const auto e = orbit_camera(target, phase + 6.283 * v / views, 4.0, 1.2);
    c.extrinsics.assign(frames, e);
    cams.push_back(c);
  }
  return cams;
}

}  // namespace

TEST(Triangulate, ExactFourViewRecovery) {
  Rng rng(1);
  const auto p = ToyMotionParams::random(rng);
  const Seq3D truth = toy_motion(p, 12);
  const auto cams = ring_of(4, 12, toy_root(p, 0).hips, rng);
  std::vector<KeypointSeq2D> seqs;
  for (const auto& c : cams) seqs.push_back(project_sequence(truth, c));
  const auto r = triangulate_sequence(seqs, cams);
  EXPECT_TRUE(r.all_constrained());
  double worst = 0.0;
  for (std::size_t i = 0; i < truth.coords.size(); ++i) {
    worst = std::max(worst, (r.points.coords[i] - truth.coords[i]).norm());
  }
  EXPECT_LT(worst, 1e-3);
  EXPECT_LT(r.mean_rms_px, 1e-6);
}

TEST(Triangulate, NoisyObservationsStayClose) {
  Rng rng(2);
  const Vec3 x(0.3, 1.1, -0.4);
  const auto cams = ring_of(4, 1, Vec3(0, 1, 0), rng);
  std::vector<Observation> obs;
  for (const auto& c : cams) {
    const Vec2 px = project(x, c[0], c.intrinsics).pixel + Vec2(standard_normal(rng), standard_normal(rng));
    obs.push_back({px, &c[0], &c.intrinsics});
  }
  const auto e = triangulate_point(obs);
  EXPECT_TRUE(e.constrained);
  EXPECT_LT((e.point - x).norm(), 0.01);
  // Gauss-Newton does not increase the reprojection error of the DLT start.
  const Eigen::Vector4d h = triangulate_dlt(obs);
  EXPECT_LE(e.rms_px, detail::reprojection_rms(obs, h.head<3>() / h[3]) + 1e-12);
}

TEST(Triangulate, HuberDownweightsOutlier) {
  Rng rng(3);
  const Vec3 x(0.0, 1.0, 0.0);
  const auto cams = ring_of(5, 1, x, rng);
  std::vector<Observation> obs;
  for (const auto& c : cams) obs.push_back({project(x, c[0], c.intrinsics).pixel, &c[0], &c.intrinsics});
  obs[2].pixel += Vec2(80, -60);
  TriangulationConfig robust;
  robust.huber_px = 1.0;
  robust.iterations = 200;
  const double plain = (triangulate_point(obs).point - x).norm();
  const double huber = (triangulate_point(obs, robust).point - x).norm();
  EXPECT_LT(huber, 0.5 * plain);
}

TEST(Triangulate, DegenerateGeometryIsFlagged) {
  Rng rng(4);
  const Vec3 x(0.1, 1.0, 0.2);
  CameraIntrinsics intr = CameraIntrinsics::centered(1000, 1000);
  const auto a = orbit_camera(x, 0.3, 4.0, 1.0);
  // Second camera a millimetre to the side: near-zero triangulation angle.
  CameraExtrinsic b = a;
  b.translation += Vec3(1e-3, 0, 0);
  std::vector<Observation> obs{{project(x, a, intr).pixel, &a, &intr}, {project(x, b, intr).pixel, &b, &intr}};
  const auto e = triangulate_point(obs);
  EXPECT_FALSE(e.constrained);
  EXPECT_LT(e.max_angle_deg, 0.1);

  // One observation only.
  EXPECT_FALSE(triangulate_point({obs[0]}).constrained);
  EXPECT_FALSE(triangulate_point({}).constrained);

  // Identical rays: point at infinity or undetermined depth.
  std::vector<Observation> same{obs[0], obs[0]};
  EXPECT_FALSE(triangulate_point(same).constrained);
}

TEST(Triangulate, InvisibleEntriesCountAgainstJoint) {
  Rng rng(5);
  const auto p = ToyMotionParams::random(rng);
  const Seq3D truth = toy_motion(p, 4);
  const auto cams = ring_of(3, 4, toy_root(p, 0).hips, rng);
  std::vector<KeypointSeq2D> seqs;
  for (const auto& c : cams) seqs.push_back(project_sequence(truth, c));
  seqs[0].set_visible(1, 5, false);
  seqs[1].set_visible(1, 5, false);
  const auto r = triangulate_sequence(seqs, cams);
  EXPECT_EQ(r.under_constrained, 1);
  EXPECT_EQ(r.constrained[1 * 17 + 5], 0);
  EXPECT_FALSE(r.all_constrained());
}

TEST(Triangulate, ShapeChecks) {
  Rng rng(6);
  const auto cams = ring_of(2, 3, Vec3(0, 1, 0), rng);
  std::vector<KeypointSeq2D> seqs{KeypointSeq2D(3, 4), KeypointSeq2D(2, 4)};
  EXPECT_THROW(triangulate_sequence(seqs, cams), std::invalid_argument);
  EXPECT_THROW(triangulate_sequence({KeypointSeq2D(3, 4)}, {cams[0]}), std::invalid_argument);
}
