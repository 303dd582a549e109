#include <gtest/gtest.h>

#include "motionlift/camsim.hpp"
#include "oracles.hpp"

using namespace motionlift;

namespace {

const CameraIntrinsics kIntr = CameraIntrinsics::centered(1000, 1000);

bool is_identity(const CameraExtrinsic& e, double tol) {
  return (e.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
         e.translation.cwiseAbs().maxCoeff() < tol;
}

}  // namespace

TEST(Predefined, MoveRightRamp) {
  const auto traj = generate_predefined({CameraMode::kMoveRight, 1.0, false, false}, 5, kIntr);
  ASSERT_EQ(traj.frames(), 5);
  for (int t = 0; t < 5; ++t) {
    EXPECT_NEAR(traj[t].center().x(), 0.25 * t, 1e-12);
    EXPECT_NEAR(traj[t].center().tail<2>().norm(), 0.0, 1e-12);
    EXPECT_LT((traj[t].rotation - Mat3::Identity()).norm(), 1e-12);
  }
}

TEST(Predefined, ReturnToOriginEndsAtIdentity) {
  for (int m = 0; m < 6; ++m) {
    PredefinedMode mode{static_cast<CameraMode>(m), 1.2, true, false};
    const auto traj = generate_predefined(mode, 9, kIntr);
    EXPECT_TRUE(is_identity(traj.extrinsics.front(), 1e-12));
    EXPECT_TRUE(is_identity(traj.extrinsics.back(), 1e-9)) << to_string(mode.kind);
  }
}

TEST(Predefined, RotationGeodesicSpacing) {
  for (auto kind : {CameraMode::kRotateCw, CameraMode::kRotateCcw}) {
    const auto traj = generate_predefined({kind, std::numbers::pi / 2, false, false}, 11, kIntr);
    const double step = std::numbers::pi / 2 / 10;
    for (int t = 1; t < 11; ++t) {
      EXPECT_NEAR(rotation_angle(traj[t - 1].rotation, traj[t].rotation), step, 1e-9);
    }
    EXPECT_NEAR(rotation_angle(Mat3::Identity(), traj[10].rotation), std::numbers::pi / 2, 1e-9);
  }
  // Opposite directions.
  const auto cw = generate_predefined({CameraMode::kRotateCw, 0.5, false, false}, 3, kIntr);
  const auto ccw = generate_predefined({CameraMode::kRotateCcw, 0.5, false, false}, 3, kIntr);
  EXPECT_LT((cw[2].rotation - ccw[2].rotation.transpose()).norm(), 1e-12);
}

TEST(Predefined, TrackPelvisKeepsSubjectCentered) {
  std::vector<Vec3> pelvis;
  for (int t = 0; t < 8; ++t) pelvis.push_back(Vec3(0.1 * t, 0.05, 4.0));
  const auto traj = generate_predefined({CameraMode::kMoveLeft, 1.5, false, true}, 8, kIntr, pelvis);
  EXPECT_TRUE(is_identity(traj[0], 1e-12));
  // Normalization re-expresses the world in the frame-0 camera, so frame-0
  // coordinates map through traj[0]^-1 ∘ aim.
  const auto aim0 = look_at(Vec3::Zero(), pelvis[0], kCameraUp);
  for (int t = 0; t < 8; ++t) {
    const Vec3 p = traj[t].apply(aim0.apply(pelvis[t]));
    EXPECT_LT(p.head<2>().norm(), 1e-9);
    EXPECT_GT(p.z(), 0.0);
  }
  EXPECT_THROW(generate_predefined({CameraMode::kMoveLeft, 1.0, false, true}, 8, kIntr),
               std::invalid_argument);
}

TEST(Predefined, Preconditions) {
  EXPECT_THROW(generate_predefined({CameraMode::kZoomIn, 1.0, false, false}, 1, kIntr),
               std::invalid_argument);
  EXPECT_THROW(generate_predefined({CameraMode::kZoomIn, 0.0, false, false}, 4, kIntr),
               std::invalid_argument);
}

TEST(Predefined, RandomModeRanges) {
  Rng rng(1);
  int rot = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto m = random_predefined_mode(rng);
    if (m.is_rotation()) {
      ++rot;
      EXPECT_GE(m.max_displacement, std::numbers::pi / 6);
      EXPECT_LE(m.max_displacement, std::numbers::pi / 2);
    } else {
      EXPECT_GE(m.max_displacement, 0.5);
      EXPECT_LE(m.max_displacement, 2.0);
    }
  }
  EXPECT_GT(rot, 250);
  EXPECT_LT(rot, 420);
}

TEST(RingViews, AzimuthsAndAim) {
  CameraTrajectory input;
  input.intrinsics = kIntr;
  const Vec3 center(0, 0, 4);
  input.extrinsics.push_back(CameraExtrinsic::identity());
  const auto views = ring_views(input, 4, center, 4.0);
  ASSERT_EQ(views.size(), 3u);
  const Vec3 off0 = (input[0].center() - center).normalized();
  for (int k = 0; k < 3; ++k) {
    const Vec3 c = views[k][0].center();
    EXPECT_NEAR((c - center).norm(), 4.0, 1e-12);
    const Vec3 off = (c - center).normalized();
    const double ang = std::atan2(off0.cross(off).dot(Vec3(0, 1, 0)), off0.dot(off));
    double expected = 2.0 * std::numbers::pi * (k + 1) / 4;
    if (expected > std::numbers::pi) expected -= 2.0 * std::numbers::pi;
    EXPECT_NEAR(std::remainder(ang - expected, 2 * std::numbers::pi), 0.0, 1e-9);
    // Optical axis passes through the center.
    const Vec3 axis = views[k][0].rotation.row(2).transpose();
    const Vec3 d = center - c;
    EXPECT_LT((d - d.dot(axis) * axis).norm(), 1e-6);
  }
}

TEST(RingViews, TwoViewsOpposite) {
  CameraTrajectory input;
  input.extrinsics.push_back(CameraExtrinsic::identity());
  const Vec3 center(0, 0, 3);
  const auto views = ring_views(input, 2, center, 3.0);
  ASSERT_EQ(views.size(), 1u);
  EXPECT_LT((views[0][0].center() - Vec3(0, 0, 6)).norm(), 1e-12);
  EXPECT_THROW(ring_views(input, 2, center, 0.0), std::invalid_argument);
  EXPECT_THROW(ring_views(input, 1, center, 3.0), std::invalid_argument);
}

TEST(RingViews, PairwiseDistinctAndShareMotion) {
  Rng rng(2);
  auto input = generate_predefined({CameraMode::kRotateCw, 0.4, false, false}, 6, kIntr);
  const Vec3 center(0.2, 0.1, 5);
  const int V = 6;
  const auto views = ring_views(input, V, center, 5.0);
  for (int a = 0; a < V - 1; ++a) {
    for (int b = a + 1; b < V - 1; ++b) {
      Vec3 oa = views[a][0].center() - center;
      Vec3 ob = views[b][0].center() - center;
      oa.y() = 0.0;
      ob.y() = 0.0;
      oa.normalize();
      ob.normalize();
      EXPECT_GE(std::acos(std::clamp(oa.dot(ob), -1.0, 1.0)), 2 * std::numbers::pi / V - 1e-9);
    }
    for (int t = 0; t < 6; ++t) {
      const auto rin = relative_transform(input[0], input[t]);
      const auto rv = relative_transform(views[a][0], views[a][t]);
      EXPECT_LT((rin.rotation - rv.rotation).norm(), 1e-12);
      EXPECT_LT((rin.translation - rv.translation).norm(), 1e-12);
    }
  }
}

TEST(SubjectCenter, BackProjects) {
  Rng rng(3);
  const auto cam = oracle::random_extrinsic(rng);
  const Vec3 c = subject_center_from_pixel(cam, kIntr, Vec2(700, 300), 3.0);
  const auto p = project(c, cam, kIntr);
  EXPECT_LT((p.pixel - Vec2(700, 300)).norm(), 1e-9);
  EXPECT_NEAR(cam.apply(c).z(), 3.0, 1e-12);
}

namespace {

CameraBank make_bank(Rng& rng) {
  CameraBank bank;
  for (int i = 0; i < 6; ++i) {
    CameraTrajectory t;
    t.intrinsics = kIntr;
    for (int f = 0; f < 12; ++f) t.extrinsics.push_back(oracle::random_extrinsic(rng));
    bank.entries.push_back({"cam" + std::to_string(i), t, i < 4 ? Split::kTrain : Split::kTest});
  }
  return bank;
}

}  // namespace

TEST(CameraBank, SplitValidation) {
  Rng rng(4);
  auto bank = make_bank(rng);
  EXPECT_NO_THROW(bank.validate());
  EXPECT_EQ(bank.split(Split::kTrain).size(), 4u);
  bank.entries[5].trajectory = bank.entries[0].trajectory;
  EXPECT_THROW(bank.validate(), std::invalid_argument);
  bank.entries[5] = bank.entries[1];
  EXPECT_THROW(bank.validate(), std::invalid_argument);
}

TEST(SampleTrainingCamera, Fractions) {
  Rng rng(5);
  const auto bank = make_bank(rng);
  for (int i = 0; i < 50; ++i) {
    const auto a = sample_training_camera(bank, 0.0, 8, kIntr, rng);
    EXPECT_FALSE(a.predefined);
    EXPECT_EQ(a.trajectory.frames(), 8);
    EXPECT_TRUE(is_identity(a.trajectory[0], 1e-12));
    EXPECT_NE(a.source, "cam4");
    EXPECT_NE(a.source, "cam5");
    const auto b = sample_training_camera(bank, 1.0, 8, kIntr, rng);
    EXPECT_TRUE(b.predefined);
    EXPECT_EQ(b.trajectory.frames(), 8);
  }
  int pre = 0;
  for (int i = 0; i < 10000; ++i) pre += sample_training_camera(bank, 0.3, 4, kIntr, rng).predefined;
  EXPECT_NEAR(pre / 10000.0, 0.3, 0.02);
  EXPECT_THROW(sample_training_camera(CameraBank{}, 0.3, 4, kIntr, rng), std::invalid_argument);
}

TEST(SampleTrainingCamera, Deterministic) {
  Rng a(9), b(9);
  Rng bank_rng(6);
  const auto bank = make_bank(bank_rng);
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(sample_training_camera(bank, 0.5, 16, kIntr, a).trajectory,
              sample_training_camera(bank, 0.5, 16, kIntr, b).trajectory);
  }
}

TEST(CropOrPad, Shapes) {
  Rng rng(7);
  CameraTrajectory t;
  for (int f = 0; f < 3; ++f) t.extrinsics.push_back(oracle::random_extrinsic(rng));
  const auto padded = crop_or_pad(t, 5, rng);
  EXPECT_EQ(padded.frames(), 5);
  EXPECT_EQ(padded[4], t[2]);
  const auto cropped = crop_or_pad(t, 2, rng);
  EXPECT_EQ(cropped.frames(), 2);
}
