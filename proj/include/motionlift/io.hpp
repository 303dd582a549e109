#pragma once

// JSON file formats for motion, cameras, 3D sequences, object poses,
// multi-view bundles, checkpoints and metrics. Doubles are written in
// shortest round-trip form, so save -> load is exact.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "motionlift/metrics.hpp"
#include "motionlift/object_pose.hpp"
#include "motionlift/trainer.hpp"

namespace motionlift {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Files

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Parses JSON text; syntax errors become SchemaError with the position.
inline Json parse_json(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

inline Json load_json(const std::filesystem::path& path) {
  return parse_json(read_text(path), path.string());
}

inline void save_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Field access with schema diagnostics

namespace detail {

inline const Json& field(const Json& j, const char* name, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  auto it = j.find(name);
  if (it == j.end()) throw SchemaError(where + ": missing field '" + name + "'");
  return *it;
}

inline double number(const Json& j, const char* name, const std::string& where) {
  const Json& v = field(j, name, where);
  if (!v.is_number()) throw SchemaError(where + ": field '" + name + "' must be a number");
  return v.get<double>();
}

inline int integer(const Json& j, const char* name, const std::string& where) {
  const Json& v = field(j, name, where);
  if (!v.is_number_integer()) throw SchemaError(where + ": field '" + name + "' must be an integer");
  return v.get<int>();
}

inline std::string string(const Json& j, const char* name, const std::string& where) {
  const Json& v = field(j, name, where);
  if (!v.is_string()) throw SchemaError(where + ": field '" + name + "' must be a string");
  return v.get<std::string>();
}

inline std::vector<double> numbers(const Json& j, const char* name, const std::string& where,
                                   std::size_t expected) {
  const Json& v = field(j, name, where);
  if (!v.is_array()) throw SchemaError(where + ": field '" + name + "' must be an array");
  if (v.size() != expected) {
    throw SchemaError(where + ": field '" + name + "' has " + std::to_string(v.size()) +
                      " entries, expected " + std::to_string(expected));
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) throw SchemaError(where + ": field '" + name + "' holds a non-number");
    out.push_back(e.get<double>());
  }
  return out;
}

inline const Json& array(const Json& j, const char* name, const std::string& where) {
  const Json& v = field(j, name, where);
  if (!v.is_array()) throw SchemaError(where + ": field '" + name + "' must be an array");
  return v;
}

inline void check_version(const Json& j, const std::string& where) {
  const int v = integer(j, "version", where);
  if (v != kFormatVersion) throw SchemaError(where + ": unsupported version " + std::to_string(v));
}

template <class Fn>
auto positive(const std::string& where, const char* name, Fn get) {
  const auto v = get();
  if (!(v > 0)) throw SchemaError(where + ": field '" + name + "' must be positive");
  return v;
}

inline Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace detail

// ---------------------------------------------------------------------------
// 2D motion: {version, fps, K, T, coords (T*K*2, row-major), visibility (T*K)}

inline Json motion_to_json(const KeypointSeq2D& s, double fps = 30.0) {
  Json coords = Json::array();
  for (const auto& p : s.coords()) {
    coords.push_back(p.x());
    coords.push_back(p.y());
  }
  Json vis = Json::array();
  for (auto v : s.visibility()) vis.push_back(v ? 1 : 0);
  return {{"version", kFormatVersion}, {"fps", fps},         {"K", s.joints()},
          {"T", s.frames()},           {"coords", coords},   {"visibility", vis}};
}

inline KeypointSeq2D motion_from_json(const Json& j, const std::string& where = "motion",
                                      double* fps = nullptr) {
  using namespace detail;
  check_version(j, where);
  const int K = positive(where, "K", [&] { return integer(j, "K", where); });
  const int T = positive(where, "T", [&] { return integer(j, "T", where); });
  const double f = positive(where, "fps", [&] { return number(j, "fps", where); });
  const std::size_t n = static_cast<std::size_t>(T) * K;
  const auto coords = numbers(j, "coords", where, 2 * n);
  const auto vis = numbers(j, "visibility", where, n);
  KeypointSeq2D s(T, K);
  for (std::size_t i = 0; i < n; ++i) {
    s.coords()[i] = Vec2(coords[2 * i], coords[2 * i + 1]);
    if (vis[i] != 0.0 && vis[i] != 1.0) {
      throw SchemaError(where + ": field 'visibility' entries must be 0 or 1");
    }
    s.visibility()[i] = vis[i] != 0.0 ? 1 : 0;
  }
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
  if (fps) *fps = f;
  return s;
}

// ---------------------------------------------------------------------------
// Camera: {version, intrinsics {fx, fy, cx, cy, w, h}, frames [[12 numbers], ...]}

inline Json camera_to_json(const CameraTrajectory& c) {
  const auto& k = c.intrinsics;
  Json frames = Json::array();
  for (const auto& e : c.extrinsics) {
    const auto rm = e.to_row_major();
    frames.push_back(Json(std::vector<double>(rm.begin(), rm.end())));
  }
  return {{"version", kFormatVersion},
          {"intrinsics",
           {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"w", k.width}, {"h", k.height}}},
          {"frames", frames}};
}

inline CameraIntrinsics intrinsics_from_json(const Json& k, const std::string& where) {
  using namespace detail;
  CameraIntrinsics in;
  in.fx = number(k, "fx", where);
  in.fy = number(k, "fy", where);
  in.cx = number(k, "cx", where);
  in.cy = number(k, "cy", where);
  in.width = number(k, "w", where);
  in.height = number(k, "h", where);
  try {
    in.validate();
  } catch (const std::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return in;
}

inline CameraTrajectory camera_from_json(const Json& j, const std::string& where = "camera") {
  using namespace detail;
  check_version(j, where);
  CameraTrajectory c;
  c.intrinsics = intrinsics_from_json(field(j, "intrinsics", where), where + ".intrinsics");
  const Json& frames = array(j, "frames", where);
  if (frames.empty()) throw SchemaError(where + ": field 'frames' is empty");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::string w = where + ".frames[" + std::to_string(t) + "]";
    if (!frames[t].is_array() || frames[t].size() != 12) {
      throw SchemaError(w + ": expected 12 numbers");
    }
    std::vector<double> v;
    for (const auto& e : frames[t]) {
      if (!e.is_number()) throw SchemaError(w + ": non-number entry");
      v.push_back(e.get<double>());
    }
    c.extrinsics.push_back(CameraExtrinsic::from_row_major(v));
    try {
      c.extrinsics.back().validate();
    } catch (const std::exception& e) {
      throw SchemaError(w + ": " + e.what());
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// 3D sequence: {version, T, J, coords (T*J*3)}

inline Json seq3d_to_json(const Seq3D& s) {
  Json coords = Json::array();
  for (const auto& p : s.coords) {
    coords.push_back(p.x());
    coords.push_back(p.y());
    coords.push_back(p.z());
  }
  return {{"version", kFormatVersion}, {"T", s.frames}, {"J", s.joints}, {"coords", coords}};
}

inline Seq3D seq3d_from_json(const Json& j, const std::string& where = "seq3d") {
  using namespace detail;
  check_version(j, where);
  const int T = positive(where, "T", [&] { return integer(j, "T", where); });
  const int J = positive(where, "J", [&] { return integer(j, "J", where); });
  const auto c = numbers(j, "coords", where, 3 * static_cast<std::size_t>(T) * J);
  Seq3D s(T, J);
  for (std::size_t i = 0; i < s.coords.size(); ++i) s.coords[i] = Vec3(c[3 * i], c[3 * i + 1], c[3 * i + 2]);
  return s;
}

// ---------------------------------------------------------------------------
// Canonical object keypoints: {version, points [[x, y, z], ...], reference [a, b]}

inline Json canonical_to_json(const CanonicalKeypoints& c) {
  Json pts = Json::array();
  for (const auto& p : c.points) pts.push_back(detail::vec_json(p));
  return {{"version", kFormatVersion}, {"points", pts}, {"reference", {c.reference_a, c.reference_b}}};
}

inline CanonicalKeypoints canonical_from_json(const Json& j, const std::string& where = "canonical") {
  using namespace detail;
  check_version(j, where);
  CanonicalKeypoints c;
  const Json& pts = array(j, "points", where);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::string w = where + ".points[" + std::to_string(i) + "]";
    if (!pts[i].is_array() || pts[i].size() != 3 || !pts[i][0].is_number() ||
        !pts[i][1].is_number() || !pts[i][2].is_number()) {
      throw SchemaError(w + ": expected 3 numbers");
    }
    c.points.emplace_back(pts[i][0].get<double>(), pts[i][1].get<double>(), pts[i][2].get<double>());
  }
  const auto ref = numbers(j, "reference", where, 2);
  c.reference_a = static_cast<int>(ref[0]);
  c.reference_b = static_cast<int>(ref[1]);
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Object pose: {version, scale, frames [{rot6d [6], translation [3]}, ...]}

inline Json object_pose_to_json(const ObjectPose& p) {
  Json frames = Json::array();
  for (int t = 0; t < p.frames(); ++t) {
    const auto& r = p.rot6d[t];
    frames.push_back({{"rot6d", {r[0], r[1], r[2], r[3], r[4], r[5]}},
                      {"translation", detail::vec_json(p.translation[t])}});
  }
  return {{"version", kFormatVersion}, {"scale", p.scale}, {"frames", frames}};
}

inline ObjectPose object_pose_from_json(const Json& j, const std::string& where = "object_pose") {
  using namespace detail;
  check_version(j, where);
  ObjectPose p;
  p.scale = positive(where, "scale", [&] { return number(j, "scale", where); });
  const Json& frames = array(j, "frames", where);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::string w = where + ".frames[" + std::to_string(t) + "]";
    const auto r = numbers(frames[t], "rot6d", w, 6);
    const auto x = numbers(frames[t], "translation", w, 3);
    Rot6d r6;
    for (int i = 0; i < 6; ++i) r6[i] = r[i];
    p.rot6d.push_back(r6);
    p.translation.emplace_back(x[0], x[1], x[2]);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Multi-view bundle: per-view motion and camera files, relative to the
// bundle file. {version, views [{motion, camera}], clamped_view,
// human_joints, canonical (optional)}

struct ViewFiles {
  std::string motion;
  std::string camera;
};

struct Bundle {
  std::vector<KeypointSeq2D> views;
  std::vector<CameraTrajectory> cameras;
  int clamped_view = 0;
  int human_joints = 0;                       // K; joints past it are object keypoints
  std::optional<CanonicalKeypoints> canonical;
  double fps = 30.0;

  int view_count() const { return static_cast<int>(views.size()); }
};

inline void save_bundle(const std::filesystem::path& path, const Bundle& b) {
  require(b.views.size() == b.cameras.size(), "save_bundle: one camera per view");
  const auto dir = path.parent_path();
  const std::string stem = path.stem().string();
  Json views = Json::array();
  for (int v = 0; v < b.view_count(); ++v) {
    const std::string m = stem + ".view" + std::to_string(v) + ".motion.json";
    const std::string c = stem + ".view" + std::to_string(v) + ".camera.json";
    save_json(dir / m, motion_to_json(b.views[v], b.fps));
    save_json(dir / c, camera_to_json(b.cameras[v]));
    views.push_back({{"motion", m}, {"camera", c}});
  }
  Json j = {{"version", kFormatVersion},
            {"views", views},
            {"clamped_view", b.clamped_view},
            {"human_joints", b.human_joints}};
  if (b.canonical) {
    const std::string c = stem + ".canonical.json";
    save_json(dir / c, canonical_to_json(*b.canonical));
    j["canonical"] = c;
  }
  save_json(path, j);
}

inline Bundle load_bundle(const std::filesystem::path& path) {
  using namespace detail;
  const std::string where = path.string();
  const Json j = load_json(path);
  check_version(j, where);
  const auto dir = path.parent_path();
  Bundle b;
  b.clamped_view = integer(j, "clamped_view", where);
  b.human_joints = integer(j, "human_joints", where);
  const Json& views = array(j, "views", where);
  for (std::size_t v = 0; v < views.size(); ++v) {
    const std::string w = where + ".views[" + std::to_string(v) + "]";
    const auto m = dir / string(views[v], "motion", w);
    const auto c = dir / string(views[v], "camera", w);
    b.views.push_back(motion_from_json(load_json(m), m.string(), &b.fps));
    b.cameras.push_back(camera_from_json(load_json(c), c.string()));
  }
  if (j.contains("canonical")) {
    const auto c = dir / string(j, "canonical", where);
    b.canonical = canonical_from_json(load_json(c), c.string());
  }
  for (int v = 0; v < b.view_count(); ++v) {
    if (b.views[v].frames() != b.views[0].frames() || b.views[v].joints() != b.views[0].joints() ||
        b.cameras[v].frames() != b.views[v].frames()) {
      throw SchemaError(where + ": view " + std::to_string(v) + " disagrees on shape");
    }
  }
  if (b.view_count() > 0 &&
      (b.human_joints < 1 || b.human_joints > b.views[0].joints())) {
    throw SchemaError(where + ": field 'human_joints' out of range");
  }
  return b;
}

// ---------------------------------------------------------------------------
// Checkpoint: {version, kind, shape, schedule, step, theta, adam {m, v, step}, rng}

struct Checkpoint {
  std::string kind;  // "single_view" or "multi_view"
  NoiseSchedule schedule;
  TrainerState state;
};

inline Json checkpoint_to_json(const Checkpoint& c) {
  const auto& s = c.state.params.shape();
  auto vec = [](const VecX& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); };
  return {{"version", kFormatVersion},
          {"kind", c.kind},
          {"shape",
           {{"joints", s.joints},
            {"hidden", s.hidden},
            {"depth", s.depth},
            {"step_dim", s.step_dim},
            {"cross_view", s.cross_view}}},
          {"schedule",
           {{"steps", c.schedule.steps()},
            {"beta_start", c.schedule.beta_start()},
            {"beta_end", c.schedule.beta_end()}}},
          {"step", c.state.step},
          {"theta", vec(c.state.params.theta())},
          {"adam", {{"m", vec(c.state.adam.m)}, {"v", vec(c.state.adam.v)}, {"step", c.state.adam.step}}},
          {"rng", c.state.rng_state()}};
}

inline Checkpoint checkpoint_from_json(const Json& j, const std::string& where = "checkpoint") {
  using namespace detail;
  check_version(j, where);
  Checkpoint c;
  c.kind = string(j, "kind", where);
  if (c.kind != "single_view" && c.kind != "multi_view") {
    throw SchemaError(where + ": field 'kind' must be single_view or multi_view");
  }
  const Json& sj = field(j, "shape", where);
  const std::string ws = where + ".shape";
  DenoiserShape shape;
  shape.joints = integer(sj, "joints", ws);
  shape.hidden = integer(sj, "hidden", ws);
  shape.depth = integer(sj, "depth", ws);
  shape.step_dim = integer(sj, "step_dim", ws);
  const Json& cv = field(sj, "cross_view", ws);
  if (!cv.is_boolean()) throw SchemaError(ws + ": field 'cross_view' must be a boolean");
  shape.cross_view = cv.get<bool>();
  const Json& sch = field(j, "schedule", where);
  const std::string wsch = where + ".schedule";
  try {
    shape.validate();
    c.schedule = make_schedule(integer(sch, "steps", wsch), number(sch, "beta_start", wsch),
                               number(sch, "beta_end", wsch));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(where + ": " + e.what());
  }
  const auto n = static_cast<std::size_t>(shape.parameter_count());
  auto vec = [](const std::vector<double>& v) {
    return VecX(Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  c.state.params = DenoiserParams(shape);
  c.state.params.theta() = vec(numbers(j, "theta", where, n));
  const Json& aj = field(j, "adam", where);
  c.state.adam.m = vec(numbers(aj, "m", where + ".adam", n));
  c.state.adam.v = vec(numbers(aj, "v", where + ".adam", n));
  c.state.adam.step = integer(aj, "step", where + ".adam");
  c.state.step = integer(j, "step", where);
  c.state.set_rng_state(string(j, "rng", where));
  return c;
}

// ---------------------------------------------------------------------------
// Metrics

inline const std::vector<std::pair<const char*, std::optional<double> MetricsRow::*>>&
metrics_columns() {
  static const std::vector<std::pair<const char*, std::optional<double> MetricsRow::*>> cols = {
      {"J2D", &MetricsRow::j2d},         {"J2D-C", &MetricsRow::j2d_centered},
      {"T_root", &MetricsRow::t_root},   {"MPJPE", &MetricsRow::mpjpe},
      {"PA-MPJPE", &MetricsRow::pa_mpjpe}, {"FS", &MetricsRow::fs},
      {"T_O_root", &MetricsRow::t_o_root}, {"O-MPJPE", &MetricsRow::o_mpjpe}};
  return cols;
}

inline Json metrics_to_json(const MetricsReport& r) {
  auto row = [](const MetricsRow& m) {
    Json j = {{"name", m.name}};
    for (const auto& [name, field] : metrics_columns()) {
      j[name] = m.*field ? Json(*(m.*field)) : Json(nullptr);
    }
    return j;
  };
  Json seqs = Json::array();
  for (const auto& s : r.sequences) seqs.push_back(row(s));
  return {{"version", kFormatVersion},
          {"units", {{"2d", "px"}, {"3d", "mm"}, {"fs", "m/frame"}}},
          {"sequences", seqs},
          {"aggregate", row(r.aggregate())}};
}

inline std::string metrics_to_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << "sequence";
  for (const auto& c : metrics_columns()) os << ',' << c.first;
  os << '\n';
  auto line = [&](const MetricsRow& m) {
    os << m.name;
    for (const auto& c : metrics_columns()) {
      os << ',';
      if (m.*(c.second)) os << Json(*(m.*(c.second))).dump();
    }
    os << '\n';
  };
  for (const auto& s : r.sequences) line(s);
  line(r.aggregate());
  return os.str();
}

}  // namespace motionlift
