#include <gtest/gtest.h>

#include "motionlift/motion.hpp"

using namespace motionlift;

namespace {

KeypointSeq2D random_seq(int T, int K, Rng& rng) {
  KeypointSeq2D s(T, K);
  for (auto& p : s.coords()) {
    p = Vec2(1000.0 * uniform01(rng), 1000.0 * uniform01(rng));
  }
  return s;
}

}  // namespace

TEST(KeypointSeq2D, DefaultsToVisible) {
  KeypointSeq2D s(3, 4);
  for (auto v : s.visibility()) EXPECT_EQ(v, 1);
  EXPECT_NO_THROW(s.validate());
}

TEST(KeypointSeq2D, RejectsNonFinite) {
  KeypointSeq2D s(2, 2);
  s.at(1, 1).x() = std::nan("");
  EXPECT_THROW(s.validate(), NumericalError);
  KeypointSeq2D one(2, 1);
  EXPECT_THROW(one.validate(), std::invalid_argument);
}

TEST(KeypointSeq2D, FlatRoundTrip) {
  Rng rng(1);
  const auto s = random_seq(4, 5, rng);
  KeypointSeq2D t(4, 5);
  t.set_flat(s.flat());
  EXPECT_EQ(s, t);
}

TEST(Decompose, CenteredInputIsUnchanged) {
  const auto skel = SkeletonSpec::generic(3);
  const Vec2 c(500, 400);
  KeypointSeq2D s(2, 3);
  for (auto& p : s.coords()) p = c;
  const auto dec = decompose(s, skel, c);
  ASSERT_EQ(dec.root.size(), 4u);
  ASSERT_EQ(dec.local.size(), 2u);
  for (const auto& p : dec.root) EXPECT_EQ(p, c);
  for (const auto& p : dec.local) EXPECT_EQ(p, c);
}

TEST(Decompose, TranslationOnlyMovesRoot) {
  Rng rng(2);
  const auto skel = SkeletonSpec::generic(6);
  const Vec2 c(500, 500);
  const auto s = random_seq(5, 6, rng);
  auto shifted = s;
  for (auto& p : shifted.coords()) p += Vec2(10, 0);
  const auto a = decompose(s, skel, c);
  const auto b = decompose(shifted, skel, c);
  for (std::size_t i = 0; i < a.root.size(); ++i) {
    EXPECT_NEAR((b.root[i] - a.root[i] - Vec2(10, 0)).norm(), 0.0, 1e-12);
  }
  for (std::size_t i = 0; i < a.local.size(); ++i) {
    EXPECT_NEAR((b.local[i] - a.local[i]).norm(), 0.0, 1e-12);
  }
}

TEST(Decompose, RoundTrip) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int K = uniform_int(rng, 2, 20);
    const int lh = uniform_int(rng, 0, K - 1);
    int rh = uniform_int(rng, 0, K - 2);
    if (rh >= lh) ++rh;
    const auto skel = SkeletonSpec::generic(K, lh, rh);
    const auto s = random_seq(uniform_int(rng, 1, 10), K, rng);
    const Vec2 c(640, 360);
    const auto back = recompose(decompose(s, skel, c), skel, c);
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_LT((back.coords()[i] - s.coords()[i]).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(Recompose, OffsetIsHipMean) {
  const auto skel = SkeletonSpec::generic(3);
  const Vec2 c(500, 500);
  MotionDecomposition dec;
  dec.frames = 1;
  dec.root = {Vec2(0, 0), Vec2(2, 0)};
  dec.local = {c};
  const auto s = recompose(dec, skel, c);
  EXPECT_EQ(s.at(0, 2), Vec2(1, 0));
}

TEST(Recompose, ZeroLocalWithHipsAtFive) {
  const auto skel = SkeletonSpec::generic(4);
  const Vec2 c(500, 500);
  MotionDecomposition dec;
  dec.frames = 1;
  dec.root = {Vec2(5, 5), Vec2(5, 5)};
  dec.local = {Vec2::Zero(), Vec2::Zero()};
  const auto s = recompose(dec, skel, c);
  EXPECT_EQ(s.at(0, 2), Vec2(5, 5) - c);
  EXPECT_EQ(s.at(0, 3), Vec2(5, 5) - c);
}

TEST(Recompose, DimensionMismatchThrows) {
  const auto skel = SkeletonSpec::generic(4);
  MotionDecomposition dec;
  dec.frames = 1;
  dec.root = {Vec2::Zero(), Vec2::Zero()};
  dec.local = {Vec2::Zero()};
  EXPECT_THROW(recompose(dec, skel, Vec2::Zero()), std::invalid_argument);
  KeypointSeq2D s(1, 5);
  EXPECT_THROW(decompose(s, skel, Vec2::Zero()), std::invalid_argument);
}

TEST(DecomposedLayout, RoundTripAndGradient) {
  Rng rng(4);
  const auto skel = SkeletonSpec::generic(5, 2, 4);
  const auto s = random_seq(3, 5, rng);
  const Vec2 c(100, 200);
  const auto packed = to_decomposed_layout(s, skel, c);
  const auto back = from_decomposed_layout(packed, skel, c);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_LT((back.coords()[i] - s.coords()[i]).norm(), 1e-9);
  }
  // Pullback of a linear functional must match directional derivatives.
  std::vector<Vec2> g(s.size());
  for (auto& e : g) e = Vec2(standard_normal(rng), standard_normal(rng));
  const auto gd = global_grad_to_decomposed(g, skel, 3);
  const VecX p0 = packed.flat();
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    KeypointSeq2D q = packed;
    VecX p = p0;
    p[i] += 1.0;
    q.set_flat(p);
    const VecX diff = from_decomposed_layout(q, skel, c).flat() - back.flat();
    double dir = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      dir += g[j].x() * diff[2 * j] + g[j].y() * diff[2 * j + 1];
    }
    EXPECT_NEAR(dir, gd[i / 2][i % 2], 1e-9);
  }
}

TEST(HipExclusionMask, Basic) {
  EXPECT_EQ(hip_exclusion_mask(SkeletonSpec::generic(4), 4),
            (std::vector<unsigned char>{0, 0, 1, 1}));
  EXPECT_EQ(hip_exclusion_mask(SkeletonSpec::generic(2), 2),
            (std::vector<unsigned char>{0, 0}));
  const auto coco = SkeletonSpec::coco17();
  const auto m = hip_exclusion_mask(coco, 17);
  EXPECT_EQ(std::count(m.begin(), m.end(), 1), 15);
  EXPECT_EQ(m[11], 0);
  EXPECT_EQ(m[12], 0);
}

TEST(SkeletonSpec, Validation) {
  auto s = SkeletonSpec::generic(3);
  s.right_hip = 0;
  EXPECT_THROW(s.validate(3), std::invalid_argument);
  EXPECT_THROW(SkeletonSpec::generic(3).validate(4), std::invalid_argument);
  auto p = SkeletonSpec::generic(3);
  p.pelvis = 7;
  EXPECT_THROW(p.validate(3), std::invalid_argument);
}

TEST(RandomDropMask, Extremes) {
  std::vector<unsigned char> vis(100, 1);
  vis[3] = 0;
  EXPECT_EQ(random_drop_mask(vis, 0.0, 7), vis);
  const auto all = random_drop_mask(vis, 1.0, 7);
  EXPECT_EQ(std::count(all.begin(), all.end(), 1), 0);
  EXPECT_THROW(random_drop_mask(vis, -0.1, 7), std::invalid_argument);
  EXPECT_THROW(random_drop_mask(vis, 1.5, 7), std::invalid_argument);
}

TEST(RandomDropMask, RateAndDeterminism) {
  std::vector<unsigned char> vis(10000, 1);
  const auto a = random_drop_mask(vis, 0.3, 11);
  const auto b = random_drop_mask(vis, 0.3, 11);
  EXPECT_EQ(a, b);
  const double dropped = 1.0 - std::count(a.begin(), a.end(), 1) / 10000.0;
  EXPECT_NEAR(dropped, 0.3, 0.02);
}

TEST(ConcatHumanObject, LayoutAndSplit) {
  Rng rng(5);
  const auto human = random_seq(4, 17, rng);
  ObjectKeypointSeq obj(4, 8);
  for (auto& p : obj.coords) p = Vec2(uniform01(rng), uniform01(rng));
  obj.static_visibility[6] = 0;
  for (int t = 0; t < 4; ++t) obj.frame_visibility[t * 8 + 6] = 0;
  obj.frame_visibility[2 * 8 + 1] = 0;
  const auto joint = concat_human_object(human, obj);
  ASSERT_EQ(joint.joints(), 25);
  for (int k = 0; k < 17; ++k) EXPECT_EQ(joint.at(0, k), human.at(0, k));
  for (int m = 0; m < 8; ++m) EXPECT_EQ(joint.at(0, 17 + m), obj.at(0, m));

  const auto split = split_human_object(joint, 17);
  EXPECT_EQ(split.human, human);
  EXPECT_EQ(split.object.coords, obj.coords);
  EXPECT_EQ(split.object.frame_visibility, obj.frame_visibility);
  EXPECT_EQ(split.object.static_visibility, obj.static_visibility);
}

TEST(ConcatHumanObject, EmptyObjectAndMismatch) {
  Rng rng(6);
  const auto human = random_seq(3, 5, rng);
  EXPECT_EQ(concat_human_object(human, ObjectKeypointSeq(3, 0)), human);
  EXPECT_THROW(concat_human_object(human, ObjectKeypointSeq(4, 2)), std::invalid_argument);
}

TEST(ObjectKeypointSeq, FrameVisibilitySubset) {
  ObjectKeypointSeq o(2, 3);
  o.static_visibility[1] = 0;
  EXPECT_THROW(o.validate(), std::invalid_argument);
  o.frame_visibility[1] = 0;
  o.frame_visibility[4] = 0;
  EXPECT_NO_THROW(o.validate());
}

TEST(Seq3D, SplitAndValidate) {
  Seq3D s(2, 5);
  for (std::size_t i = 0; i < s.coords.size(); ++i) s.coords[i] = Vec3::Constant(double(i));
  auto [a, b] = split_seq3d(s, 3);
  EXPECT_EQ(a.joints, 3);
  EXPECT_EQ(b.joints, 2);
  EXPECT_EQ(b.at(1, 1), s.at(1, 4));
  s.at(0, 0).x() = INFINITY;
  EXPECT_THROW(s.validate(), NumericalError);
}
