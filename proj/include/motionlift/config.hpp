#pragma once

// Flat key = value configuration. Lines starting with '#' are comments.
// Unknown keys, duplicates and malformed values are rejected at load.

#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <variant>

#include "motionlift/chamfer.hpp"
#include "motionlift/diffusion.hpp"
#include "motionlift/io.hpp"
#include "motionlift/sds.hpp"
#include "motionlift/triangulate.hpp"

namespace motionlift {

struct Config {
  std::uint64_t seed = 0;

  // schedule
  int schedule_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  // model
  int hidden = 64;
  int depth = 2;
  int step_dim = 32;
  int views = 4;

  // data (simulate)
  int sequences = 16;
  int test_sequences = 4;
  int frames = 16;
  double fps = 30.0;
  int bank_size = 20;
  double test_camera_fraction = 0.3;
  double image_size = 1000.0;
  double focal = 1000.0;
  bool with_object = false;

  // training
  int sv_steps = 2000;
  int mv_steps = 1000;
  int batch_size = 64;
  double train_lr = 1e-4;
  double train_lr_floor = 1.0;
  int hybrid_video = 2;  // video : reprojected items
  int hybrid_reprojected = 1;
  double drop_rate = 0.1;
  double predefined_fraction = 0.7;
  double train_line_weight = 0.1;

  // lift
  int lift_stage = 1;
  int sds_iterations = 500;
  double sds_lr = 0.01;
  double sds_lr_floor = 0.0;
  double sds_weight = 1.0;
  double sds_line_weight = 0.01;
  double band_lo = 0.05;
  double band_hi = 0.8;
  int sds_draws = 1;
  double subject_distance = 4.5;

  // recon
  int tri_iterations = 20;
  double tri_min_angle_deg = 0.1;
  double tri_huber_px = 0.0;
  int object_iterations = 2000;
  double object_lr = 0.05;
  double lambda_smooth = 0.1;

  // mask alignment
  int mask_restarts = 200;
  int mask_samples = 5000;
  int mask_refine_iterations = 300;
  double mask_fx = 1000.0;
  double mask_fy = 1000.0;
  bool mask_visible_surface = true;

  // metrics
  double fs_height = 0.05;
  std::string units = "mm";

  void validate() const;

  NoiseSchedule schedule() const { return make_schedule(schedule_steps, beta_start, beta_end); }

  DenoiserShape shape(int joints, bool cross_view) const {
    DenoiserShape s;
    s.joints = joints;
    s.hidden = hidden;
    s.depth = depth;
    s.step_dim = step_dim;
    s.cross_view = cross_view;
    return s;
  }

  TrainerConfig trainer(bool multi_view) const {
    TrainerConfig t;
    t.steps = multi_view ? mv_steps : sv_steps;
    t.batch_size = batch_size;
    t.lr = train_lr;
    t.lr_floor = train_lr_floor;
    t.line_weight = train_line_weight;
    return t;
  }

  LiftConfig lift() const {
    LiftConfig l;
    l.views = views;
    l.iterations = sds_iterations;
    l.lr = sds_lr;
    l.lr_floor = sds_lr_floor;
    l.sds_weight = sds_weight;
    l.line_weight = sds_line_weight;
    l.draws = sds_draws;
    l.band_lo = band_lo;
    l.band_hi = band_hi;
    l.seed = seed;
    return l;
  }

  TriangulationConfig triangulation() const {
    TriangulationConfig t;
    t.iterations = tri_iterations;
    t.min_angle_deg = tri_min_angle_deg;
    t.huber_px = tri_huber_px;
    return t;
  }

  ObjectFitConfig object_fit() const {
    ObjectFitConfig o;
    o.iterations = object_iterations;
    o.lr = object_lr;
    o.lambda_smooth = lambda_smooth;
    return o;
  }

  ChamferAlignConfig chamfer() const {
    ChamferAlignConfig c;
    c.restarts = mask_restarts;
    c.samples = mask_samples;
    c.refine_iterations = mask_refine_iterations;
    c.visible_surface = mask_visible_surface;
    return c;
  }
};

namespace detail {

using ConfigSlot = std::variant<int*, double*, bool*, std::uint64_t*, std::string*>;

/// Key table, in the order keys are written back out.
inline std::vector<std::pair<std::string, ConfigSlot>> config_slots(Config& c) {
  return {
      {"seed", &c.seed},
      {"schedule.steps", &c.schedule_steps},
      {"schedule.beta_start", &c.beta_start},
      {"schedule.beta_end", &c.beta_end},
      {"model.hidden", &c.hidden},
      {"model.depth", &c.depth},
      {"model.step_dim", &c.step_dim},
      {"model.views", &c.views},
      {"data.sequences", &c.sequences},
      {"data.test_sequences", &c.test_sequences},
      {"data.frames", &c.frames},
      {"data.fps", &c.fps},
      {"data.bank_size", &c.bank_size},
      {"data.test_camera_fraction", &c.test_camera_fraction},
      {"data.image_size", &c.image_size},
      {"data.focal", &c.focal},
      {"data.with_object", &c.with_object},
      {"train.sv_steps", &c.sv_steps},
      {"train.mv_steps", &c.mv_steps},
      {"train.batch_size", &c.batch_size},
      {"train.lr", &c.train_lr},
      {"train.lr_floor", &c.train_lr_floor},
      {"train.hybrid_video", &c.hybrid_video},
      {"train.hybrid_reprojected", &c.hybrid_reprojected},
      {"train.drop_rate", &c.drop_rate},
      {"train.predefined_fraction", &c.predefined_fraction},
      {"train.line_weight", &c.train_line_weight},
      {"lift.stage", &c.lift_stage},
      {"lift.subject_distance", &c.subject_distance},
      {"sds.iterations", &c.sds_iterations},
      {"sds.lr", &c.sds_lr},
      {"sds.lr_floor", &c.sds_lr_floor},
      {"sds.sds_weight", &c.sds_weight},
      {"sds.line_weight", &c.sds_line_weight},
      {"sds.band_lo", &c.band_lo},
      {"sds.band_hi", &c.band_hi},
      {"sds.draws", &c.sds_draws},
      {"recon.tri_iterations", &c.tri_iterations},
      {"recon.tri_min_angle_deg", &c.tri_min_angle_deg},
      {"recon.tri_huber_px", &c.tri_huber_px},
      {"recon.object_iterations", &c.object_iterations},
      {"recon.object_lr", &c.object_lr},
      {"recon.lambda_smooth", &c.lambda_smooth},
      {"mask.restarts", &c.mask_restarts},
      {"mask.samples", &c.mask_samples},
      {"mask.refine_iterations", &c.mask_refine_iterations},
      {"mask.fx", &c.mask_fx},
      {"mask.fy", &c.mask_fy},
      {"mask.visible_surface", &c.mask_visible_surface},
      {"metrics.fs_height", &c.fs_height},
      {"metrics.units", &c.units},
  };
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, out);
  return r.ec == std::errc() && r.ptr == end;
}

inline void set_config_value(const ConfigSlot& slot, const std::string& key,
                             const std::string& value, const std::string& where) {
  const std::string bad = where + ": invalid value '" + value + "' for key '" + key + "'";
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (value == "true" || value == "1") {
            *p = true;
          } else if (value == "false" || value == "0") {
            *p = false;
          } else {
            throw SchemaError(bad);
          }
        } else if constexpr (std::is_same_v<T, std::string>) {
          *p = value;
        } else {
          if (!parse_number(value, *p)) throw SchemaError(bad);
        }
      },
      slot);
}

}  // namespace detail

inline void Config::validate() const {
  auto check = [](bool ok, const char* key, const char* rule) {
    if (!ok) throw SchemaError(std::string("config: '") + key + "' " + rule);
  };
  check(schedule_steps >= 1, "schedule.steps", "must be >= 1");
  check(beta_start > 0 && beta_start <= beta_end && beta_end < 1, "schedule.beta_start",
        "and schedule.beta_end must satisfy 0 < start <= end < 1");
  check(hidden >= 1, "model.hidden", "must be >= 1");
  check(depth >= 0, "model.depth", "must be >= 0");
  check(step_dim >= 2 && step_dim % 2 == 0, "model.step_dim", "must be even and >= 2");
  check(views >= 2, "model.views", "must be >= 2");
  check(sequences >= 1, "data.sequences", "must be >= 1");
  check(test_sequences >= 0, "data.test_sequences", "must be >= 0");
  check(frames >= 2, "data.frames", "must be >= 2");
  check(fps > 0, "data.fps", "must be positive");
  check(bank_size >= 2, "data.bank_size", "must be >= 2");
  check(test_camera_fraction > 0 && test_camera_fraction < 1, "data.test_camera_fraction",
        "must lie in (0, 1)");
  check(image_size > 0, "data.image_size", "must be positive");
  check(focal > 0, "data.focal", "must be positive");
  check(sv_steps >= 0, "train.sv_steps", "must be >= 0");
  check(mv_steps >= 0, "train.mv_steps", "must be >= 0");
  check(batch_size >= 1, "train.batch_size", "must be >= 1");
  check(train_lr > 0, "train.lr", "must be positive");
  check(train_lr_floor >= 0 && train_lr_floor <= 1, "train.lr_floor", "must lie in [0, 1]");
  check(hybrid_video >= 0 && hybrid_reprojected >= 0 && hybrid_video + hybrid_reprojected > 0,
        "train.hybrid_video", "and train.hybrid_reprojected must be >= 0 and not both 0");
  check(drop_rate >= 0 && drop_rate < 1, "train.drop_rate", "must lie in [0, 1)");
  check(predefined_fraction >= 0 && predefined_fraction <= 1, "train.predefined_fraction",
        "must lie in [0, 1]");
  check(train_line_weight >= 0, "train.line_weight", "must be >= 0");
  check(lift_stage == 1 || lift_stage == 2, "lift.stage", "must be 1 or 2");
  check(subject_distance > 0, "lift.subject_distance", "must be positive");
  check(sds_iterations >= 0, "sds.iterations", "must be >= 0");
  check(sds_lr > 0, "sds.lr", "must be positive");
  check(sds_lr_floor >= 0 && sds_lr_floor <= 1, "sds.lr_floor", "must lie in [0, 1]");
  check(sds_draws >= 1, "sds.draws", "must be >= 1");
  check(0 <= band_lo && band_lo <= band_hi && band_hi <= 1, "sds.band_lo",
        "and sds.band_hi must satisfy 0 <= lo <= hi <= 1");
  check(tri_iterations >= 0, "recon.tri_iterations", "must be >= 0");
  check(tri_min_angle_deg >= 0, "recon.tri_min_angle_deg", "must be >= 0");
  check(tri_huber_px >= 0, "recon.tri_huber_px", "must be >= 0");
  check(object_iterations >= 0, "recon.object_iterations", "must be >= 0");
  check(object_lr > 0, "recon.object_lr", "must be positive");
  check(lambda_smooth >= 0, "recon.lambda_smooth", "must be >= 0");
  check(mask_restarts >= 1, "mask.restarts", "must be >= 1");
  check(mask_samples >= 1, "mask.samples", "must be >= 1");
  check(mask_refine_iterations >= 0, "mask.refine_iterations", "must be >= 0");
  check(mask_fx > 0 && mask_fy > 0, "mask.fx", "and mask.fy must be positive");
  check(fs_height > 0, "metrics.fs_height", "must be positive");
  check(units == "mm", "metrics.units", "must be mm");
}

/// Parses config text on top of the defaults.
inline Config parse_config(const std::string& text, const std::string& where = "config") {
  Config c;
  const auto slots = detail::config_slots(c);
  std::map<std::string, detail::ConfigSlot> table(slots.begin(), slots.end());
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string at = where + ":" + std::to_string(lineno);
    const std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw SchemaError(at + ": expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    auto it = table.find(key);
    if (it == table.end()) throw SchemaError(at + ": unknown key '" + key + "'");
    if (seen.count(key)) {
      throw SchemaError(at + ": key '" + key + "' already set on line " + std::to_string(seen[key]));
    }
    seen[key] = lineno;
    detail::set_config_value(it->second, key, value, at);
  }
  c.validate();
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  return parse_config(read_text(path), path.string());
}

/// Every key, one per line, in table order. parse_config() inverts it.
inline std::string config_to_text(const Config& cfg) {
  Config c = cfg;
  std::ostringstream os;
  for (const auto& [key, slot] : detail::config_slots(c)) {
    os << key << " = ";
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, bool>) {
            os << (*p ? "true" : "false");
          } else if constexpr (std::is_same_v<T, double>) {
            os << Json(*p).dump();
          } else {
            os << *p;
          }
        },
        slot);
    os << '\n';
  }
  return os.str();
}

}  // namespace motionlift
