#include <gtest/gtest.h>

#include <filesystem>

#include <rapidjson/document.h>

#include "fixtures.hpp"
#include "motionlift/io.hpp"
#include "oracles.hpp"

using namespace motionlift;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("motionlift_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

KeypointSeq2D random_motion(int T, int K, Rng& rng) {
  KeypointSeq2D s(T, K);
  for (auto& p : s.coords()) p = Vec2(1000 * uniform01(rng), 1000 * uniform01(rng)) / 3.0;
  for (auto& v : s.visibility()) v = uniform01(rng) < 0.8;
  return s;
}

CameraTrajectory random_camera(int T, Rng& rng) {
  CameraTrajectory c;
  c.intrinsics = {1000.0 / 3.0, 999.1, 512.25, 384.0 + 1e-9, 1024, 768};
  for (int t = 0; t < T; ++t) c.extrinsics.push_back(oracle::random_extrinsic(rng, 2.0));
  return c;
}

std::string expect_schema_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const SchemaError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no SchemaError";
  return {};
}

std::vector<double> rj_numbers(const rapidjson::Value& v) {
  std::vector<double> out;
  for (const auto& e : v.GetArray()) out.push_back(e.GetDouble());
  return out;
}

}  // namespace

TEST(Io, MotionRoundTripIsExact) {
  Rng rng(1);
  const auto s = random_motion(7, 5, rng);
  const auto text = motion_to_json(s, 29.97).dump();
  double fps = 0.0;
  const auto back = motion_from_json(parse_json(text, "t"), "t", &fps);
  EXPECT_EQ(back.coords(), s.coords());
  EXPECT_EQ(back.visibility(), s.visibility());
  EXPECT_EQ(fps, 29.97);
}

TEST(Io, CameraSeqObjectRoundTripsAreExact) {
  Rng rng(2);
  const auto c = random_camera(6, rng);
  EXPECT_EQ(camera_from_json(parse_json(camera_to_json(c).dump(), "c")), c);

  Seq3D q(4, 3);
  for (auto& p : q.coords) p = oracle::random_vec3(rng, 0.7);
  EXPECT_EQ(seq3d_from_json(parse_json(seq3d_to_json(q).dump(), "q")), q);

  ObjectPose pose;
  pose.scale = 0.123456789;
  for (int t = 0; t < 3; ++t) {
    pose.rot6d.push_back(matrix_to_rot6d(oracle::random_rotation(rng)));
    pose.translation.push_back(oracle::random_vec3(rng));
  }
  const auto pb = object_pose_from_json(parse_json(object_pose_to_json(pose).dump(), "p"));
  EXPECT_EQ(pb.scale, pose.scale);
  EXPECT_EQ(pb.rot6d, pose.rot6d);
  EXPECT_EQ(pb.translation, pose.translation);

  CanonicalKeypoints canon{box_corners(Vec3(0.3, 0.2, 0.1)), 0, 7};
  const auto cb = canonical_from_json(parse_json(canonical_to_json(canon).dump(), "k"));
  EXPECT_EQ(cb.points, canon.points);
  EXPECT_EQ(cb.reference_b, 7);
}

TEST(Io, MissingFieldIsNamed) {
  Rng rng(3);
  Json j = motion_to_json(random_motion(2, 3, rng));
  j.erase("coords");
  EXPECT_NE(expect_schema_error([&] { motion_from_json(j); }).find("'coords'"), std::string::npos);

  Json c = camera_to_json(random_camera(2, rng));
  c["intrinsics"].erase("fy");
  EXPECT_NE(expect_schema_error([&] { camera_from_json(c); }).find("'fy'"), std::string::npos);

  Json m = motion_to_json(random_motion(2, 3, rng));
  m["coords"].erase(m["coords"].size() - 1);
  EXPECT_NE(expect_schema_error([&] { motion_from_json(m); }).find("'coords'"), std::string::npos);
  m = motion_to_json(random_motion(2, 3, rng));
  m["T"] = "two";
  EXPECT_NE(expect_schema_error([&] { motion_from_json(m); }).find("'T'"), std::string::npos);
}

TEST(Io, TruncatedFileReportsPosition) {
  Rng rng(4);
  const std::string text = motion_to_json(random_motion(3, 3, rng)).dump(1);
  const std::string msg =
      expect_schema_error([&] { parse_json(text.substr(0, text.size() / 2), "motion.json"); });
  EXPECT_NE(msg.find("motion.json"), std::string::npos);
  EXPECT_NE(msg.find("line"), std::string::npos);
}

TEST(Io, RejectsInvalidValues) {
  Rng rng(5);
  Json c = camera_to_json(random_camera(1, rng));
  c["frames"][0][0] = 5.0;  // no longer a rotation
  expect_schema_error([&] { camera_from_json(c); });
  Json m = motion_to_json(random_motion(1, 3, rng));
  m["visibility"][0] = 2;
  expect_schema_error([&] { motion_from_json(m); });
  m = motion_to_json(random_motion(1, 3, rng));
  m["version"] = 9;
  expect_schema_error([&] { motion_from_json(m); });
}

TEST(Io, SecondParserAgreesOnTenFixtureFiles) {
  // Files written by this library, read back by rapidjson and compared
  // field by field with the in-memory values.
  const auto dir = temp_dir("dual");
  Rng rng(6);
  for (int i = 0; i < 10; ++i) {
    const fs::path p = dir / ("fixture" + std::to_string(i) + ".json");
    rapidjson::Document d;
    if (i % 2 == 0) {
      const auto s = random_motion(3 + i, 4, rng);
      save_json(p, motion_to_json(s));
      d.Parse<rapidjson::kParseFullPrecisionFlag>(read_text(p).c_str());
      ASSERT_FALSE(d.HasParseError());
      EXPECT_EQ(d["T"].GetInt(), s.frames());
      EXPECT_EQ(d["K"].GetInt(), s.joints());
      const auto c = rj_numbers(d["coords"]);
      ASSERT_EQ(c.size(), 2 * s.size());
      for (std::size_t k = 0; k < s.size(); ++k) {
        EXPECT_EQ(c[2 * k], s.coords()[k].x());
        EXPECT_EQ(c[2 * k + 1], s.coords()[k].y());
        EXPECT_EQ(d["visibility"][static_cast<rapidjson::SizeType>(k)].GetInt(), s.visibility()[k]);
      }
    } else {
      const auto cam = random_camera(2 + i, rng);
      save_json(p, camera_to_json(cam));
      d.Parse<rapidjson::kParseFullPrecisionFlag>(read_text(p).c_str());
      ASSERT_FALSE(d.HasParseError());
      EXPECT_EQ(d["intrinsics"]["fy"].GetDouble(), cam.intrinsics.fy);
      EXPECT_EQ(d["intrinsics"]["cy"].GetDouble(), cam.intrinsics.cy);
      ASSERT_EQ(d["frames"].Size(), static_cast<rapidjson::SizeType>(cam.frames()));
      for (int t = 0; t < cam.frames(); ++t) {
        const auto v = rj_numbers(d["frames"][t]);
        const auto rm = cam[t].to_row_major();
        EXPECT_EQ(v, std::vector<double>(rm.begin(), rm.end()));
      }
    }
  }
}

TEST(Io, BundleRoundTrip) {
  const auto dir = temp_dir("bundle");
  Rng rng(7);
  Bundle b;
  b.human_joints = 3;
  for (int v = 0; v < 3; ++v) {
    b.views.push_back(random_motion(4, 5, rng));
    b.cameras.push_back(random_camera(4, rng));
  }
  b.canonical = CanonicalKeypoints{box_corners(Vec3(0.1, 0.2, 0.3)), 0, 1};
  save_bundle(dir / "lift.json", b);
  const auto back = load_bundle(dir / "lift.json");
  ASSERT_EQ(back.view_count(), 3);
  for (int v = 0; v < 3; ++v) {
    EXPECT_EQ(back.views[v].coords(), b.views[v].coords());
    EXPECT_EQ(back.cameras[v], b.cameras[v]);
  }
  EXPECT_EQ(back.human_joints, 3);
  ASSERT_TRUE(back.canonical.has_value());
  EXPECT_EQ(back.canonical->points, b.canonical->points);

  Json j = load_json(dir / "lift.json");
  j["human_joints"] = 9;
  save_json(dir / "bad.json", j);
  expect_schema_error([&] { load_bundle(dir / "bad.json"); });
}

TEST(Io, CheckpointResumeMatchesUninterruptedRun) {
  Rng rng(8);
  const auto pool = fixture::toy_batch(4, 6, rng, 0.1);
  const auto sched = make_schedule(100);
  TrainerConfig cfg;
  cfg.steps = 10;
  cfg.batch_size = 3;
  cfg.lr = 1e-3;
  cfg.lr_floor = 0.0;

  auto a = TrainerState::fresh(fixture::small_shape(17), 3);
  for (int i = 0; i < 5; ++i) train_step(a, pool, sched, cfg);
  const std::string text = checkpoint_to_json({"single_view", sched, a}).dump();
  const double next_a = train_step(a, pool, sched, cfg);

  auto c = checkpoint_from_json(parse_json(text, "ckpt"));
  EXPECT_EQ(c.schedule.betas(), sched.betas());
  const double next_b = train_step(c.state, pool, c.schedule, cfg);
  EXPECT_EQ(next_a, next_b);
  EXPECT_EQ(a.params.theta(), c.state.params.theta());

  Json bad = parse_json(text, "ckpt");
  bad["theta"].erase(0);
  EXPECT_NE(expect_schema_error([&] { checkpoint_from_json(bad); }).find("'theta'"), std::string::npos);
}

TEST(Io, MetricsJsonAndCsv) {
  MetricsReport r;
  MetricsRow a;
  a.name = "seq0";
  a.mpjpe = 12.5;
  a.j2d = 3.0;
  r.sequences = {a};
  const Json j = metrics_to_json(r);
  EXPECT_EQ(j["sequences"][0]["MPJPE"].get<double>(), 12.5);
  EXPECT_TRUE(j["sequences"][0]["O-MPJPE"].is_null());
  const std::string csv = metrics_to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sequence,J2D,J2D-C,T_root,MPJPE,PA-MPJPE,FS,T_O_root,O-MPJPE");
  EXPECT_NE(csv.find("seq0,3.0,,,12.5,,,,"), std::string::npos);
  EXPECT_NE(csv.find("mean,3.0,,,12.5,,,,"), std::string::npos);
}
