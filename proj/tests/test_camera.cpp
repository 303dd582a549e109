#include <gtest/gtest.h>

#include "motionlift/camera.hpp"
#include "oracles.hpp"

using namespace motionlift;

TEST(Project, PrincipalPoint) {
  const auto intr = CameraIntrinsics::centered(1000, 1000);
  const auto p = project(Vec3(0, 0, 1), CameraExtrinsic::identity(), intr);
  EXPECT_TRUE(p.valid);
  EXPECT_EQ(p.pixel, Vec2(500, 500));
  const auto q = project(Vec3(0.5, 0, 1), CameraExtrinsic::identity(), intr);
  EXPECT_EQ(q.pixel, Vec2(1000, 500));
}

TEST(Project, BehindCameraInvalid) {
  const auto intr = CameraIntrinsics::centered(1000, 1000);
  EXPECT_FALSE(project(Vec3(1, 1, 0), CameraExtrinsic::identity(), intr).valid);
  EXPECT_FALSE(project(Vec3(1, 1, -2), CameraExtrinsic::identity(), intr).valid);
  EXPECT_FALSE(project(Vec3(1, 1, 5e-7), CameraExtrinsic::identity(), intr).valid);
}

TEST(Project, ComposedExtrinsic) {
  Rng rng(1);
  const auto intr = CameraIntrinsics::centered(640, 480, 800);
  for (int i = 0; i < 100; ++i) {
    const auto a = oracle::random_extrinsic(rng);
    const auto b = oracle::random_extrinsic(rng);
    Vec3 x = oracle::random_vec3(rng);
    const auto ab = b.compose(a);
    if (ab.apply(x).z() < 0.1) continue;
    const auto direct = project(x, ab, intr);
    const auto two = project_camera_point(b.apply(a.apply(x)), intr);
    EXPECT_LT((direct.pixel - two.pixel).norm(), 1e-9);
  }
}

TEST(CameraExtrinsic, RowMajorRoundTrip) {
  Rng rng(2);
  const auto e = oracle::random_extrinsic(rng);
  const auto v = e.to_row_major();
  EXPECT_EQ(v[3], e.translation.x());
  EXPECT_EQ(v[4], e.rotation(1, 0));
  EXPECT_EQ(CameraExtrinsic::from_row_major(v), e);
}

TEST(CameraExtrinsic, Validate) {
  CameraExtrinsic e;
  EXPECT_NO_THROW(e.validate());
  e.rotation(0, 0) = -1;
  EXPECT_THROW(e.validate(), std::invalid_argument);
  e.rotation(0, 0) = 1.01;
  EXPECT_THROW(e.validate(), std::invalid_argument);
}

TEST(RelativeTransform, Identities) {
  Rng rng(3);
  const auto a = oracle::random_extrinsic(rng);
  const auto r = relative_transform(a, a);
  EXPECT_LT((r.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(r.translation.norm(), 1e-12);
  const auto b = oracle::random_extrinsic(rng);
  const auto rb = relative_transform(CameraExtrinsic::identity(), b);
  EXPECT_LT((rb.rotation - b.rotation).norm(), 1e-15);
  EXPECT_LT((rb.translation - b.translation).norm(), 1e-15);
}

TEST(RelativeTransform, CompositionThroughWorld) {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const auto a = oracle::random_extrinsic(rng);
    const auto b = oracle::random_extrinsic(rng);
    const Vec3 xa = oracle::random_vec3(rng);
    const Vec3 via_world = b.apply(a.inverse().apply(xa));
    EXPECT_LT((relative_transform(a, b).apply(xa) - via_world).norm(), 1e-12);
  }
}

TEST(NormalizeTrajectory, TwoPathProjection) {
  Rng rng(5);
  CameraTrajectory traj;
  traj.intrinsics = CameraIntrinsics::centered(1000, 1000);
  for (int t = 0; t < 10; ++t) traj.extrinsics.push_back(oracle::random_extrinsic(rng, 0.3));
  const auto norm = normalize_trajectory(traj);
  EXPECT_EQ(norm[0], CameraExtrinsic::identity());
  for (int t = 0; t < 10; ++t) {
    for (int i = 0; i < 20; ++i) {
      const Vec3 x = traj[t].inverse().apply(Vec3(standard_normal(rng), standard_normal(rng),
                                                    3.0 + uniform01(rng)));
      const auto direct = project(x, traj[t], traj.intrinsics);
      const auto via = project(traj[0].apply(x), norm[t], traj.intrinsics);
      ASSERT_TRUE(direct.valid && via.valid);
      EXPECT_LT((direct.pixel - via.pixel).norm(), 1e-6);
    }
  }
}

TEST(NormalizeTrajectory, ConstantAndIdempotent) {
  Rng rng(6);
  CameraTrajectory traj;
  const auto e = oracle::random_extrinsic(rng);
  traj.extrinsics.assign(4, e);
  const auto n = normalize_trajectory(traj);
  for (const auto& x : n.extrinsics) {
    EXPECT_LT((x.rotation - Mat3::Identity()).norm(), 1e-12);
    EXPECT_LT(x.translation.norm(), 1e-12);
  }
  CameraTrajectory r;
  for (int t = 0; t < 5; ++t) r.extrinsics.push_back(oracle::random_extrinsic(rng));
  const auto once = normalize_trajectory(r);
  EXPECT_EQ(normalize_trajectory(once), once);
}

TEST(LookAt, OpticalAxisThroughTarget) {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const Vec3 eye = oracle::random_vec3(rng, 3.0);
    const Vec3 target = oracle::random_vec3(rng);
    const auto e = look_at(eye, target, Vec3(0, 1, 0));
    EXPECT_LT(e.orthonormality_error(), 1e-12);
    EXPECT_GT(e.rotation.determinant(), 0.0);
    const Vec3 c = e.apply(target);
    EXPECT_LT(c.head<2>().norm(), 1e-9);
    EXPECT_GT(c.z(), 0.0);
    EXPECT_LT((e.center() - eye).norm(), 1e-12);
  }
}

TEST(RotationAngle, MatchesAxisAngle) {
  for (double a : {0.0, 1e-7, 0.3, 1.5, 3.0}) {
    EXPECT_NEAR(rotation_angle(Mat3::Identity(), axis_angle(Vec3(1, 2, 3), a)), a, 1e-12);
  }
}
