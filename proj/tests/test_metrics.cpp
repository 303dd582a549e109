#include <gtest/gtest.h>

#include "motionlift/metrics.hpp"
#include "oracles.hpp"

using namespace motionlift;

namespace {

Seq3D random_seq(int T, int J, Rng& rng) {
  Seq3D s(T, J);
  for (auto& p : s.coords) p = oracle::random_vec3(rng, 0.5);
  return s;
}

KeypointSeq2D random_2d(int T, int K, Rng& rng) {
  KeypointSeq2D s(T, K);
  for (auto& p : s.coords()) p = Vec2(1000 * uniform01(rng), 1000 * uniform01(rng));
  return s;
}

double squared_error(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e += (a[i] - b[i]).squaredNorm();
  return e;
}

}  // namespace

TEST(Metrics, FixtureOffsets) {
  Rng rng(1);
  const auto skel = SkeletonSpec::coco17();
  const auto gt2 = random_2d(8, 17, rng);
  auto pred2 = gt2;
  for (auto& p : pred2.coords()) p += Vec2(3.0, 4.0);  // 5 px
  EXPECT_NEAR(j2d(pred2, gt2), 5.0, 1e-9);
  EXPECT_NEAR(j2d_centered(pred2, gt2, skel), 0.0, 1e-9);

  const auto gt = random_seq(8, 17, rng);
  Seq3D pred = gt;
  for (auto& p : pred.coords) p += Vec3(0.0, 0.006, 0.008);  // 10 mm
  EXPECT_NEAR(mpjpe(pred, gt), 10.0, 1e-9);
  EXPECT_NEAR(pa_mpjpe(pred, gt), 0.0, 1e-6);
  EXPECT_NEAR(t_root(pred, gt, human_root_joints(skel)), 10.0, 1e-9);

  Seq3D obj_gt = random_seq(8, 8, rng), obj = obj_gt;
  for (auto& p : obj.coords) p += Vec3(0.03, 0.0, -0.04);  // 50 mm
  EXPECT_NEAR(mpjpe(obj, obj_gt), 50.0, 1e-9);
  EXPECT_NEAR(t_object_root(obj, obj_gt), 50.0, 1e-9);
}

TEST(Metrics, J2dSkipsHiddenEntries) {
  Rng rng(2);
  const auto gt = random_2d(2, 3, rng);
  auto pred = gt;
  pred.at(0, 0) += Vec2(100, 0);
  pred.set_visible(0, 0, false);
  pred.at(1, 2) += Vec2(0, 6);
  EXPECT_NEAR(j2d(pred, gt), 1.2, 1e-12);  // 6 px over 5 visible entries
  KeypointSeq2D none(1, 2);
  none.set_visible(0, 0, false);
  none.set_visible(0, 1, false);
  EXPECT_THROW(j2d(none, none), std::invalid_argument);
  EXPECT_THROW(j2d(gt, KeypointSeq2D(2, 4)), std::invalid_argument);
}

TEST(Metrics, PaMpjpeRemovesSimilarity) {
  Rng rng(3);
  const auto gt = random_seq(10, 17, rng);
  const Mat3 r = oracle::random_rotation(rng);
  const Vec3 t = oracle::random_vec3(rng);
  Seq3D pred = gt;
  for (auto& p : pred.coords) p = 1.7 * r * p + t;
  EXPECT_GT(mpjpe(pred, gt), 100.0);
  EXPECT_NEAR(pa_mpjpe(pred, gt), 0.0, 1e-6);
}

TEST(Metrics, PaAlignmentBeatsGridSearch) {
  // The fitted similarity must have no larger squared error than any pose on
  // a grid around it, and PA-MPJPE never exceeds plain MPJPE by much.
  Rng rng(4);
  const auto gt = random_seq(6, 10, rng);
  Seq3D pred = gt;
  for (auto& p : pred.coords) p = 0.9 * p + oracle::random_vec3(rng, 0.03) + Vec3(0.1, 0, 0);
  const Similarity s = align_points(pred.coords, gt.coords, true);
  std::vector<Vec3> best;
  for (const auto& p : pred.coords) best.push_back(s.apply(p));
  const double e0 = squared_error(best, gt.coords);
  const double step = 0.01;
  for (int axis = 0; axis < 3; ++axis) {
    for (double a : {-step, step}) {
      for (double ds : {-step, 0.0, step}) {
        for (double dt : {-step, 0.0, step}) {
          const Mat3 dr = Eigen::AngleAxisd(a, Vec3::Unit(axis)).toRotationMatrix();
          std::vector<Vec3> cand;
          for (const auto& p : pred.coords) {
            cand.push_back((s.scale + ds) * dr * s.rotation * p + s.translation + dt * Vec3::Unit(axis));
          }
          EXPECT_GE(squared_error(cand, gt.coords), e0);
        }
      }
    }
  }
  EXPECT_LT(pa_mpjpe(pred, gt), mpjpe(pred, gt));
}

TEST(Metrics, RootUsesPelvisWhenPresent) {
  Rng rng(5);
  auto skel = SkeletonSpec::generic(4);
  skel.pelvis = 3;
  const auto gt = random_seq(3, 4, rng);
  Seq3D pred = gt;
  for (int t = 0; t < 3; ++t) pred.at(t, 0) += Vec3(0.2, 0, 0);
  EXPECT_NEAR(t_root(pred, gt, human_root_joints(skel)), 0.0, 1e-12);
  skel.pelvis.reset();
  EXPECT_NEAR(t_root(pred, gt, human_root_joints(skel)), 100.0, 1e-9);
}

TEST(Metrics, FootSlidingHandComputed) {
  auto skel = SkeletonSpec::generic(3);
  skel.foot_joints = {2};
  Seq3D s(3, 3);
  // Foot on the ground slides 3-4-5 cm, then lifts to H/2 and slides 1 cm.
  s.at(0, 2) = Vec3(0, 0, 0);
  s.at(1, 2) = Vec3(0.03, 0.025, 0.04);
  s.at(2, 2) = Vec3(0.04, 0.1, 0.04);
  const double w1 = 2.0 - std::sqrt(2.0);
  EXPECT_NEAR(foot_sliding(s, skel), (0.05 + w1 * 0.01) / 2.0, 1e-12);
  // Raised above H: no contribution.
  for (int t = 0; t < 3; ++t) s.at(t, 2).y() = 0.2;
  EXPECT_EQ(foot_sliding(s, skel), 0.0);
  skel.foot_joints.clear();
  EXPECT_THROW(foot_sliding(s, skel), std::invalid_argument);
}

TEST(Metrics, ReportAggregatesPresentFields) {
  MetricsReport rep;
  MetricsRow a, b;
  a.name = "a";
  a.mpjpe = 10.0;
  a.o_mpjpe = 4.0;
  b.name = "b";
  b.mpjpe = 20.0;
  rep.sequences = {a, b};
  const auto m = rep.aggregate();
  EXPECT_DOUBLE_EQ(*m.mpjpe, 15.0);
  EXPECT_DOUBLE_EQ(*m.o_mpjpe, 4.0);
  EXPECT_FALSE(m.j2d.has_value());
}

TEST(Metrics, EvaluateSequenceFillsApplicableFields) {
  Rng rng(6);
  const auto skel = SkeletonSpec::coco17();
  const auto gt = random_seq(4, 17, rng);
  const auto row = evaluate_sequence("s", gt, gt, skel);
  EXPECT_EQ(*row.mpjpe, 0.0);
  EXPECT_TRUE(row.fs.has_value());
  EXPECT_FALSE(row.j2d.has_value());
  EXPECT_FALSE(row.o_mpjpe.has_value());
}

TEST(Metrics, CenteredSingleJointAndTranslationProbe) {
  Rng rng(7);
  const auto skel = SkeletonSpec::coco17();
  const auto gt = random_2d(5, 17, rng);
  auto pred = gt;
  for (int t = 0; t < 5; ++t) pred.at(t, 9) += Vec2(6, -8);  // left wrist, 10 px
  EXPECT_NEAR(j2d_centered(pred, gt, skel), 10.0 / 17.0, 1e-9);
  const double base = j2d_centered(pred, gt, skel);
  auto p2 = pred, g2 = gt;
  for (int t = 0; t < 5; ++t) {
    const Vec2 dp(500 * standard_normal(rng), 500 * standard_normal(rng));
    const Vec2 dg(500 * standard_normal(rng), 500 * standard_normal(rng));
    for (int k = 0; k < 17; ++k) {
      p2.at(t, k) += dp;
      g2.at(t, k) += dg;
    }
  }
  EXPECT_NEAR(j2d_centered(p2, g2, skel), base, 1e-9);
}

TEST(Metrics, BruteForceRecomputation) {
  Rng rng(8);
  const auto a = random_seq(7, 5, rng), b = random_seq(7, 5, rng);
  double sum = 0.0, root = 0.0;
  for (int t = 0; t < 7; ++t) {
    for (int j = 0; j < 5; ++j) {
      const Vec3 d = a.at(t, j) - b.at(t, j);
      sum += std::sqrt(d.x() * d.x() + d.y() * d.y() + d.z() * d.z());
    }
    root += (0.5 * (a.at(t, 0) + a.at(t, 1)) - 0.5 * (b.at(t, 0) + b.at(t, 1))).norm();
  }
  EXPECT_NEAR(mpjpe(a, b), 1000.0 * sum / 35.0, 1e-9);
  EXPECT_NEAR(t_root(a, b, {0, 1}), 1000.0 * root / 7.0, 1e-9);
}

TEST(Metrics, PaMatchesRotationGridSearchOnToy) {
  // Exhaustive Euler-angle grid (coarse, then fine around the best cell);
  // scale and translation are solved in closed form for each rotation.
  Rng rng(9);
  Seq3D gt(1, 4);
  gt.at(0, 0) = Vec3(0, 0, 0);
  gt.at(0, 1) = Vec3(0.4, 0, 0);
  gt.at(0, 2) = Vec3(0, 0.5, 0.1);
  gt.at(0, 3) = Vec3(0.1, 0.2, 0.6);
  const Mat3 r = oracle::random_rotation(rng);
  Seq3D pred = gt;
  for (auto& p : pred.coords) p = 0.8 * r * p + Vec3(1, 2, 3) + oracle::random_vec3(rng, 0.005);

  auto eval = [&](const Mat3& rot) {
    Vec3 mp = Vec3::Zero(), mg = Vec3::Zero();
    for (int j = 0; j < 4; ++j) {
      mp += rot * pred.coords[j] / 4.0;
      mg += gt.coords[j] / 4.0;
    }
    double num = 0.0, den = 0.0;
    for (int j = 0; j < 4; ++j) {
      num += (rot * pred.coords[j] - mp).dot(gt.coords[j] - mg);
      den += (rot * pred.coords[j] - mp).squaredNorm();
    }
    const double s = std::max(num / den, 0.0);
    Seq3D al = pred;
    double sq = 0.0;
    for (int j = 0; j < 4; ++j) {
      al.coords[j] = s * (rot * pred.coords[j] - mp) + mg;
      sq += (al.coords[j] - gt.coords[j]).squaredNorm();
    }
    return std::make_pair(sq, mpjpe(al, gt));
  };
  auto euler = [](double a, double b, double c) {
    return Mat3(Eigen::AngleAxisd(a, Vec3::UnitZ()) * Eigen::AngleAxisd(b, Vec3::UnitY()) *
                Eigen::AngleAxisd(c, Vec3::UnitZ()));
  };
  const double pi = 3.14159265358979323846;
  double best_sq = 1e300, best_mm = 0.0;
  Vec3 best(0, 0, 0);
  const double coarse = pi / 36.0;
  for (double a = -pi; a < pi; a += coarse) {
    for (double b = 0; b <= pi; b += coarse) {
      for (double c = -pi; c < pi; c += coarse) {
        const auto [sq, mm] = eval(euler(a, b, c));
        if (sq < best_sq) {
          best_sq = sq;
          best_mm = mm;
          best = Vec3(a, b, c);
        }
      }
    }
  }
  const double fine = coarse / 40.0;
  const Vec3 center = best;
  for (int i = -40; i <= 40; ++i) {
    for (int j = -40; j <= 40; ++j) {
      for (int k = -40; k <= 40; ++k) {
        const auto [sq, mm] = eval(euler(center.x() + i * fine, center.y() + j * fine, center.z() + k * fine));
        if (sq < best_sq) {
          best_sq = sq;
          best_mm = mm;
        }
      }
    }
  }
  EXPECT_NEAR(pa_mpjpe(pred, gt), best_mm, 1.0);
}
