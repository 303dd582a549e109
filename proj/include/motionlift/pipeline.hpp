#pragma once

// Command implementations behind the CLI. Every command writes its
// artifacts under `out` plus run_manifest.json. All artifacts except the
// manifest depend only on the config, the seed and the inputs.
//
// Requires linking OpenSSL libcrypto (SHA-256).

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include "motionlift/config.hpp"
#include "motionlift/io.hpp"
#include "motionlift/mesh.hpp"
#include "motionlift/synth.hpp"

namespace motionlift {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Hashing and the run manifest

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

inline std::string sha256_file(const fs::path& p) { return sha256_hex(read_text(p)); }

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<std::pair<std::string, std::string>> inputs;     // path, sha256
  std::vector<std::pair<std::string, std::string>> artifacts;  // path under out, sha256
  std::vector<std::pair<std::string, double>> stage_seconds;

  Json to_json() const {
    Json in = Json::array(), art = Json::array(), times = Json::object();
    for (const auto& [p, h] : inputs) in.push_back({{"path", p}, {"sha256", h}});
    for (const auto& [p, h] : artifacts) art.push_back({{"path", p}, {"sha256", h}});
    for (const auto& [s, t] : stage_seconds) times[s] = t;
    return {{"version", kFormatVersion}, {"command", command}, {"config_sha256", config_hash},
            {"seed", seed},              {"threads", threads}, {"inputs", in},
            {"artifacts", art},          {"stage_seconds", times}};
  }
};

inline constexpr const char* kManifestName = "run_manifest.json";

/// Collects inputs, artifacts and stage timings for one command.
class RunRecorder {
 public:
  RunRecorder(std::string command, const Config& cfg, fs::path out, int threads)
      : out_(std::move(out)) {
    m_.command = std::move(command);
    m_.config_hash = sha256_hex(config_to_text(cfg));
    m_.seed = cfg.seed;
    m_.threads = threads;
    fs::create_directories(out_);
  }

  const fs::path& out() const { return out_; }

  void input(const fs::path& p) { m_.inputs.push_back({p.string(), sha256_file(p)}); }

  /// Writes `text` to out/rel and records it.
  void artifact(const std::string& rel, const std::string& text) {
    write_text(out_ / rel, text);
    m_.artifacts.push_back({rel, sha256_hex(text)});
  }
  void artifact(const std::string& rel, const Json& j) { artifact(rel, j.dump(1) + "\n"); }

  /// Records a file some other writer already put under out.
  void existing(const std::string& rel) { m_.artifacts.push_back({rel, sha256_file(out_ / rel)}); }

  template <class Fn>
  auto stage(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Stop {
      RunRecorder* r;
      std::string name;
      std::chrono::steady_clock::time_point t0;
      ~Stop() {
        r->m_.stage_seconds.push_back(
            {name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
      }
    } stop{this, name, t0};
    return fn();
  }

  const RunManifest& manifest() const { return m_; }

  void finish() {
    std::sort(m_.artifacts.begin(), m_.artifacts.end());
    save_json(out_ / kManifestName, m_.to_json());
  }

 private:
  fs::path out_;
  RunManifest m_;
};

// ---------------------------------------------------------------------------
// Dataset layout written by simulate

struct DatasetSequence {
  std::string name;
  Split split = Split::kTrain;
  std::string camera_source;  // bank entry name
  std::string motion, camera, gt3d;
  std::string object3d;       // empty without an object
};

struct Dataset {
  fs::path root;
  CameraIntrinsics intrinsics;
  double fps = 30.0;
  std::optional<CanonicalKeypoints> canonical;
  std::vector<std::string> train_cameras, test_cameras;
  std::vector<DatasetSequence> sequences;

  std::vector<const DatasetSequence*> split(Split s) const {
    std::vector<const DatasetSequence*> out;
    for (const auto& q : sequences) {
      if (q.split == s) out.push_back(&q);
    }
    return out;
  }

  /// COCO-17 followed by the object keypoints when the dataset has an object.
  SkeletonSpec skeleton() const {
    return SkeletonSpec::coco17().with_object(canonical ? canonical->size() : 0);
  }
};

inline const char* split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

inline Split split_from_name(const std::string& s, const std::string& where) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw SchemaError(where + ": field 'split' must be train or test");
}

inline Dataset load_dataset(const fs::path& dir) {
  using namespace detail;
  const fs::path path = dir / "dataset.json";
  const std::string where = path.string();
  const Json j = load_json(path);
  check_version(j, where);
  Dataset d;
  d.root = dir;
  d.intrinsics = intrinsics_from_json(field(j, "intrinsics", where), where + ".intrinsics");
  d.fps = number(j, "fps", where);
  if (j.contains("canonical")) {
    const auto p = dir / string(j, "canonical", where);
    d.canonical = canonical_from_json(load_json(p), p.string());
  }
  auto names = [&](const char* key) {
    const fs::path p = dir / string(j, key, where);
    const Json m = load_json(p);
    std::vector<std::string> out;
    for (const auto& e : array(m, "cameras", p.string())) {
      if (!e.is_string()) throw SchemaError(p.string() + ": field 'cameras' holds a non-string");
      out.push_back(e.get<std::string>());
    }
    return out;
  };
  d.train_cameras = names("train_cameras");
  d.test_cameras = names("test_cameras");
  const Json& seqs = array(j, "sequences", where);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const std::string w = where + ".sequences[" + std::to_string(i) + "]";
    DatasetSequence s;
    s.name = string(seqs[i], "name", w);
    s.split = split_from_name(string(seqs[i], "split", w), w);
    s.camera_source = string(seqs[i], "camera_source", w);
    s.motion = string(seqs[i], "motion", w);
    s.camera = string(seqs[i], "camera", w);
    s.gt3d = string(seqs[i], "gt3d", w);
    if (seqs[i].contains("object3d")) s.object3d = string(seqs[i], "object3d", w);
    d.sequences.push_back(std::move(s));
  }
  return d;
}

inline CameraBank load_camera_bank(const Dataset& d, Split which) {
  CameraBank bank;
  const auto& names = which == Split::kTrain ? d.train_cameras : d.test_cameras;
  for (const auto& n : names) {
    const fs::path p = d.root / "cameras" / (n + ".json");
    bank.entries.push_back({n, camera_from_json(load_json(p), p.string()), which});
  }
  return bank;
}

// ---------------------------------------------------------------------------
// simulate

/// Toy motions, a split camera bank, and per-sequence projections.
inline void cmd_simulate(const Config& cfg, const fs::path& out, int threads = 1) {
  cfg.validate();
  RunRecorder rec("simulate", cfg, out, threads);
  const auto intr = CameraIntrinsics::centered(cfg.image_size, cfg.image_size, cfg.focal);
  Rng rng(cfg.seed);

  // Camera bank; the last entries form the test split.
  const int n_test = std::max(1, static_cast<int>(std::lround(cfg.test_camera_fraction * cfg.bank_size)));
  require(n_test < cfg.bank_size, "simulate: test split leaves no training cameras");
  CameraBank bank;
  for (int i = 0; i < cfg.bank_size; ++i) {
    std::ostringstream name;
    name << "cam" << std::setw(3) << std::setfill('0') << i;
    const Split s = i >= cfg.bank_size - n_test ? Split::kTest : Split::kTrain;
    bank.entries.push_back({name.str(), random_handheld_trajectory(cfg.frames, intr, rng), s});
  }
  bank.validate();
  Json train_names = Json::array(), test_names = Json::array();
  for (const auto& e : bank.entries) {
    rec.artifact("cameras/" + e.name + ".json", camera_to_json(e.trajectory));
    (e.split == Split::kTrain ? train_names : test_names).push_back(e.name);
  }
  rec.artifact("cameras/train_manifest.json", Json{{"version", kFormatVersion}, {"cameras", train_names}});
  rec.artifact("cameras/test_manifest.json", Json{{"version", kFormatVersion}, {"cameras", test_names}});

  std::optional<CanonicalKeypoints> canon;
  if (cfg.with_object) {
    canon = CanonicalKeypoints{box_corners(Vec3(0.4, 0.3, 0.2)), 0, 7};
    rec.artifact("canonical.json", canonical_to_json(*canon));
  }

  Json seqs = Json::array();
  const int total = cfg.sequences + cfg.test_sequences;
  for (int i = 0; i < total; ++i) {
    const Split split = i < cfg.sequences ? Split::kTrain : Split::kTest;
    const auto pool = bank.split(split);
    const auto& src = *pool[uniform_int(rng, 0, static_cast<int>(pool.size()) - 1)];
    ToyMotionParams params = ToyMotionParams::random(rng);
    params.fps = cfg.fps;
    const Seq3D motion = toy_motion(params, cfg.frames);
    const Vec3 target = toy_root(params, 0).hips;
    const CameraExtrinsic base = orbit_camera(target, 2.0 * std::numbers::pi * uniform01(rng),
                                              4.0 + 1.5 * uniform01(rng), 1.0 + 0.6 * uniform01(rng));
    const CameraTrajectory cam = apply_relative_motion(src.trajectory, base);
    KeypointSeq2D kp = project_sequence(motion, cam);

    std::ostringstream name;
    name << "seq" << std::setw(3) << std::setfill('0') << i;
    const std::string stem = "sequences/" + name.str();
    Json entry = {{"name", name.str()},
                  {"split", split_name(split)},
                  {"camera_source", src.name},
                  {"motion", stem + ".motion.json"},
                  {"camera", stem + ".camera.json"},
                  {"gt3d", stem + ".gt3d.json"}};
    rec.artifact(stem + ".gt3d.json", seq3d_to_json(motion));
    if (canon) {
      const auto track = toy_object_track(motion, params, canon->points, 1.0);
      const KeypointSeq2D obj = project_sequence(track.keypoints, cam);
      KeypointSeq2D joint(cfg.frames, motion.joints + canon->size());
      for (int t = 0; t < cfg.frames; ++t) {
        for (int k = 0; k < joint.joints(); ++k) {
          const bool human = k < motion.joints;
          const auto& src2d = human ? kp : obj;
          const int kk = human ? k : k - motion.joints;
          joint.at(t, k) = src2d.at(t, kk);
          joint.set_visible(t, k, src2d.visible(t, kk));
        }
      }
      kp = joint;
      rec.artifact(stem + ".object3d.json", seq3d_to_json(track.keypoints));
      entry["object3d"] = stem + ".object3d.json";
    }
    rec.artifact(stem + ".motion.json", motion_to_json(kp, cfg.fps));
    rec.artifact(stem + ".camera.json", camera_to_json(cam));
    seqs.push_back(entry);
  }
  Json ds = {{"version", kFormatVersion},
             {"fps", cfg.fps},
             {"intrinsics", camera_to_json(CameraTrajectory{{CameraExtrinsic{}}, intr})["intrinsics"]},
             {"train_cameras", "cameras/train_manifest.json"},
             {"test_cameras", "cameras/test_manifest.json"},
             {"sequences", seqs}};
  if (canon) ds["canonical"] = "canonical.json";
  rec.artifact("dataset.json", ds);
  rec.finish();
}

// ---------------------------------------------------------------------------
// Training data

struct LoadedSequence {
  KeypointSeq2D keypoints;  // human joints, then object keypoints
  CameraTrajectory camera;
  Seq3D motion;
  Vec3 subject_center;
  double radius = 1.0;
};

inline LoadedSequence load_sequence(const Dataset& d, const DatasetSequence& s) {
  LoadedSequence q;
  const auto mp = d.root / s.motion, cp = d.root / s.camera, gp = d.root / s.gt3d;
  q.motion = seq3d_from_json(load_json(gp), gp.string());
  if (!s.object3d.empty()) {
    const auto op = d.root / s.object3d;
    const Seq3D obj = seq3d_from_json(load_json(op), op.string());
    require(obj.frames == q.motion.frames, "dataset: object and human frame counts differ");
    Seq3D all(q.motion.frames, q.motion.joints + obj.joints);
    for (int t = 0; t < all.frames; ++t) {
      for (int j = 0; j < all.joints; ++j) {
        all.at(t, j) = j < q.motion.joints ? q.motion.at(t, j) : obj.at(t, j - q.motion.joints);
      }
    }
    q.motion = std::move(all);
  }
  q.keypoints = motion_from_json(load_json(mp), mp.string());
  if (q.keypoints.joints() != q.motion.joints) throw SchemaError(mp.string() + ": joint count differs from ground truth");
  q.camera = camera_from_json(load_json(cp), cp.string());
  const SkeletonSpec skel = SkeletonSpec::coco17();
  q.subject_center = 0.5 * (q.motion.at(0, skel.left_hip) + q.motion.at(0, skel.right_hip));
  q.radius = (q.camera[0].center() - q.subject_center).norm();
  return q;
}

/// Hybrid single-view pool over the train split: in every cycle of
/// hybrid_video + hybrid_reprojected sequences, the first hybrid_video keep
/// their video camera and the rest are re-projected through a camera drawn
/// from the train bank or the predefined modes.
inline TrainingBatch build_single_view_pool(const Config& cfg, const Dataset& d, Rng& rng) {
  TrainingBatch pool;
  pool.skeleton = d.skeleton();
  const CameraBank bank = load_camera_bank(d, Split::kTrain);
  const auto epipoles = epipole_bank(d.intrinsics);
  const int cycle = cfg.hybrid_video + cfg.hybrid_reprojected;
  int i = 0;
  for (const auto* s : d.split(Split::kTrain)) {
    const LoadedSequence q = load_sequence(d, *s);
    require(q.motion.joints == pool.skeleton.joints(), "training: motion joints do not match the dataset skeleton");
    const bool video = (i++ % cycle) < cfg.hybrid_video;
    if (video) {
      const Vec3 e = epipoles[uniform_int(rng, 0, static_cast<int>(epipoles.size()) - 1)];
      pool.items.push_back(make_training_item(q.keypoints, q.camera, pool.skeleton,
                                              DataSource::kVideoGlobal, e, cfg.drop_rate, rng));
    } else {
      std::vector<Vec3> pelvis;
      for (int t = 0; t < q.motion.frames; ++t) {
        const Vec3 hips = 0.5 * (q.motion.at(t, pool.skeleton.left_hip) + q.motion.at(t, pool.skeleton.right_hip));
        pelvis.push_back(q.camera[0].apply(hips));
      }
      const SampledCamera rel = sample_training_camera(bank, cfg.predefined_fraction, q.motion.frames,
                                                       d.intrinsics, rng, pelvis);
      const CameraTrajectory cam = apply_relative_motion(rel.trajectory, q.camera[0]);
      pool.items.push_back(make_training_item(project_sequence(q.motion, cam), cam, pool.skeleton,
                                              DataSource::kReprojectedLocal, std::nullopt,
                                              cfg.drop_rate, rng));
    }
  }
  require(!pool.items.empty(), "training: dataset has no train sequences");
  return pool;
}

/// Multi-view pool: each train motion seen from its own camera plus V-1 ring
/// cameras around the subject. Conditioning carries cameras only.
inline std::vector<MultiViewItem> build_multi_view_pool(const Config& cfg, const Dataset& d, Rng& rng) {
  std::vector<MultiViewItem> pool;
  const SkeletonSpec skel = d.skeleton();
  for (const auto* s : d.split(Split::kTrain)) {
    const LoadedSequence q = load_sequence(d, *s);
    std::vector<CameraTrajectory> cams{q.camera};
    for (auto& c : ring_views(q.camera, cfg.views, q.subject_center, q.radius)) cams.push_back(std::move(c));
    MultiViewItem it;
    for (const auto& cam : cams) {
      const KeypointSeq2D kp = project_sequence(q.motion, cam);
      KeypointSeq2D c = kp;
      c.set_flat(CanvasMap{cam.intrinsics}.to_canvas(kp));
      it.targets.push_back(to_decomposed_layout(c, skel, Vec2::Zero()).flat());
      it.cond.push_back(Conditioning::make(cam, EpipolarLineSet{}, kp.frames(), kp.joints()));
      it.visibility.push_back(random_drop_mask(kp.visibility(), cfg.drop_rate, rng));
    }
    pool.push_back(std::move(it));
  }
  require(!pool.empty(), "training: dataset has no train sequences");
  return pool;
}

// ---------------------------------------------------------------------------
// train-sv / train-mv

struct TrainSummary {
  double eval_before = 0.0;
  double eval_after = 0.0;
  std::vector<double> losses;
};

/// Trains from scratch, or continues `resume` up to the configured step count.
inline TrainSummary cmd_train(const Config& cfg, const fs::path& dataset_dir, const fs::path& out,
                              bool multi_view, const std::optional<fs::path>& resume = {},
                              int threads = 1) {
  cfg.validate();
  RunRecorder rec(multi_view ? "train-mv" : "train-sv", cfg, out, threads);
  rec.input(dataset_dir / "dataset.json");
  const Dataset d = load_dataset(dataset_dir);
  Rng data_rng(cfg.seed ^ 0x5bd1e995ULL);
  const TrainerConfig tcfg = cfg.trainer(multi_view);

  Checkpoint ck;
  ck.kind = multi_view ? "multi_view" : "single_view";
  if (resume) {
    rec.input(*resume);
    ck = checkpoint_from_json(load_json(*resume), resume->string());
    if (ck.kind != (multi_view ? "multi_view" : "single_view")) {
      throw SchemaError(resume->string() + ": checkpoint kind " + ck.kind + " does not match the command");
    }
  } else {
    ck.schedule = cfg.schedule();
    ck.state = TrainerState::fresh(cfg.shape(d.skeleton().joints(), multi_view), cfg.seed);
  }

  TrainSummary sum;
  auto run = [&](const auto& pool) {
    auto eval = [&] {
      if constexpr (std::is_same_v<std::decay_t<decltype(pool)>, TrainingBatch>) {
        return evaluation_loss(ck.state.params, pool, ck.schedule, tcfg.line_weight);
      } else {
        return evaluation_loss(ck.state.params, pool, ck.schedule);
      }
    };
    sum.eval_before = eval();
    rec.stage("train", [&] {
      while (ck.state.step < tcfg.steps) sum.losses.push_back(train_step(ck.state, pool, ck.schedule, tcfg));
      return 0;
    });
    sum.eval_after = eval();
  };
  if (multi_view) {
    run(build_multi_view_pool(cfg, d, data_rng));
  } else {
    run(build_single_view_pool(cfg, d, data_rng));
  }

  std::ostringstream curve;
  curve << "step,loss\n";
  const long first = ck.state.step - static_cast<long>(sum.losses.size());
  for (std::size_t i = 0; i < sum.losses.size(); ++i) {
    curve << first + static_cast<long>(i) + 1 << ',' << Json(sum.losses[i]).dump() << '\n';
  }
  rec.artifact("checkpoint.json", checkpoint_to_json(ck));
  rec.artifact("loss_curve.csv", curve.str());
  rec.artifact("training_summary.json",
               Json{{"version", kFormatVersion},
                    {"steps", ck.state.step},
                    {"eval_loss_before", sum.eval_before},
                    {"eval_loss_after", sum.eval_after},
                    {"validation", "fixed-seed loss on the training pool"}});
  rec.finish();
  return sum;
}

// ---------------------------------------------------------------------------
// lift

struct LiftInputs {
  fs::path motion, camera, checkpoint;
  int human_joints = 0;                 // 0: every joint is human
  std::optional<fs::path> canonical;    // object keypoints, carried into the bundle
};

/// Lifts one view into a V-view bundle. Stage 1 runs SDS with a single-view
/// checkpoint; stage 2 samples the multi-view model with view 0 clamped.
inline Bundle cmd_lift(const Config& cfg, const LiftInputs& in, const fs::path& out, int threads = 1) {
  cfg.validate();
  RunRecorder rec("lift", cfg, out, threads);
  for (const auto& p : {in.motion, in.camera, in.checkpoint}) rec.input(p);
  double fps = 30.0;
  const KeypointSeq2D input = motion_from_json(load_json(in.motion), in.motion.string(), &fps);
  const CameraTrajectory cam = camera_from_json(load_json(in.camera), in.camera.string());
  const Checkpoint ck = checkpoint_from_json(load_json(in.checkpoint), in.checkpoint.string());
  if (cam.frames() != input.frames()) throw SchemaError("lift: camera and motion disagree on T");
  if (ck.state.params.shape().joints != input.joints()) {
    throw SchemaError("lift: checkpoint expects " + std::to_string(ck.state.params.shape().joints) +
                      " joints, input has " + std::to_string(input.joints()));
  }
  const int K = input.joints();
  const int human = in.human_joints > 0 ? in.human_joints : K;
  if (human > K) throw SchemaError("lift: human_joints exceeds the input joint count");
  const SkeletonSpec skel = human == 17 ? SkeletonSpec::coco17().with_object(K - 17) : SkeletonSpec::generic(K);
  const Vec3 center = subject_center_from_pixel(cam[0], cam.intrinsics, hip_mean(input, skel, 0),
                                                cfg.subject_distance);
  MultiViewState s = init_multiview_state(input, cam, skel, cfg.views, center, cfg.subject_distance);

  Bundle b;
  b.fps = fps;
  b.human_joints = human;
  if (in.canonical) {
    rec.input(*in.canonical);
    b.canonical = canonical_from_json(load_json(*in.canonical), in.canonical->string());
  }
  Json report = {{"version", kFormatVersion}, {"stage", cfg.lift_stage}, {"views", cfg.views}};
  if (cfg.lift_stage == 1) {
    if (ck.kind != "single_view") throw SchemaError("lift: stage 1 needs a single_view checkpoint");
    const ViewDenoiser den = make_view_denoiser(ck.state.params, s);
    s = rec.stage("sds", [&] { return lift_single_to_multi(s, den, ck.schedule, cfg.lift()); });
    report["line_loss_px_per_frame"] = s.line_loss_history.back() / s.frames();
    report["iterations"] = s.iteration;
  } else {
    if (ck.kind != "multi_view") throw SchemaError("lift: stage 2 needs a multi_view checkpoint");
    std::vector<Conditioning> conds;
    for (int v = 0; v < cfg.views; ++v) {
      conds.push_back(Conditioning::make(s.cameras[v], EpipolarLineSet{}, input.frames(), K));
    }
    KeypointSeq2D c = input;
    c.set_flat(CanvasMap{cam.intrinsics}.to_canvas(input));
    const VecX known = to_decomposed_layout(c, skel, Vec2::Zero()).flat();
    std::vector<unsigned char> mask;
    for (auto v : input.visibility()) mask.insert(mask.end(), 2, v);
    const auto& params = ck.state.params;
    const MultiViewX0Predictor predict = [&](const std::vector<VecX>& xn, int n) {
      std::vector<const Conditioning*> cp;
      for (const auto& cc : conds) cp.push_back(&cc);
      return multiview_denoiser_forward(params, xn, cp, n);
    };
    Rng rng(cfg.seed);
    const auto x = rec.stage("sample", [&] {
      return reverse_sample_clamped(predict, cfg.views, known.size(), ck.schedule, known, mask, rng);
    });
    for (int v = 1; v < cfg.views; ++v) s.views[v] = x[v];
    double px = 0.0;
    detail::total_line_objective(s, line_loss_pairs(cfg.views), nullptr, &px);
    report["line_loss_px_per_frame"] = px / s.frames();
  }
  for (int v = 0; v < s.view_count(); ++v) {
    b.views.push_back(s.global(v));  // view 0 is the input itself
    b.cameras.push_back(s.cameras[v]);
  }
  save_bundle(out / "bundle.json", b);
  rec.existing("bundle.json");
  for (int v = 0; v < b.view_count(); ++v) {
    rec.existing("bundle.view" + std::to_string(v) + ".motion.json");
    rec.existing("bundle.view" + std::to_string(v) + ".camera.json");
  }
  if (b.canonical) rec.existing("bundle.canonical.json");
  rec.artifact("lift_report.json", report);
  rec.finish();
  return b;
}

// ---------------------------------------------------------------------------
// reconstruct

struct ReconstructResult {
  TriangulationResult human;
  std::optional<TriangulationResult> object;
  std::optional<ObjectFitResult> fit;
};

inline ReconstructResult cmd_reconstruct(const Config& cfg, const fs::path& bundle_path,
                                         const fs::path& out, int threads = 1) {
  cfg.validate();
  RunRecorder rec("reconstruct", cfg, out, threads);
  rec.input(bundle_path);
  const Bundle b = load_bundle(bundle_path);
  if (b.view_count() < 2) {
    throw GeometryError("reconstruct: bundle has " + std::to_string(b.view_count()) +
                        " view(s); triangulation needs at least 2");
  }
  const int K = b.human_joints;
  std::vector<KeypointSeq2D> human, object;
  for (const auto& v : b.views) {
    const auto parts = split_human_object(v, K);
    human.push_back(parts.human);
    if (parts.object.keypoints > 0) {
      KeypointSeq2D o(v.frames(), parts.object.keypoints);
      for (int t = 0; t < v.frames(); ++t) {
        for (int m = 0; m < parts.object.keypoints; ++m) {
          o.at(t, m) = parts.object.at(t, m);
          o.set_visible(t, m, parts.object.frame_visibility[static_cast<std::size_t>(t) * parts.object.keypoints + m]);
        }
      }
      object.push_back(o);
    }
  }
  ReconstructResult r;
  const auto tcfg = cfg.triangulation();
  r.human = rec.stage("triangulate", [&] { return triangulate_sequence(human, b.cameras, tcfg); });
  if (r.human.under_constrained == r.human.points.frames * r.human.points.joints) {
    throw GeometryError("reconstruct: every joint is under-constrained");
  }
  auto flagged = [](const TriangulationResult& t) {
    Json list = Json::array();
    for (int f = 0; f < t.points.frames; ++f) {
      for (int j = 0; j < t.points.joints; ++j) {
        if (!t.constrained[static_cast<std::size_t>(f) * t.points.joints + j]) list.push_back({f, j});
      }
    }
    return list;
  };
  Json report = {{"version", kFormatVersion},
                 {"views", b.view_count()},
                 {"mean_rms_px", r.human.mean_rms_px},
                 {"under_constrained", r.human.under_constrained},
                 {"under_constrained_entries", flagged(r.human)}};
  rec.artifact("recon3d.json", seq3d_to_json(r.human.points));

  if (!object.empty()) {
    if (!b.canonical) throw SchemaError(bundle_path.string() + ": object keypoints need field 'canonical'");
    r.object = triangulate_sequence(object, b.cameras, tcfg);
    std::vector<unsigned char> visible(b.canonical->size(), 1);
    for (int m = 0; m < b.canonical->size(); ++m) {
      for (int t = 0; t < r.object->points.frames; ++t) {
        if (!r.object->constrained[static_cast<std::size_t>(t) * b.canonical->size() + m]) visible[m] = 0;
      }
    }
    r.fit = rec.stage("object_fit", [&] {
      return fit_object_trajectory(r.object->points, *b.canonical, visible, cfg.object_fit());
    });
    const auto res = object_fit_residuals(r.fit->pose, *b.canonical, r.object->points, visible);
    rec.artifact("object3d.json", seq3d_to_json(r.object->points));
    rec.artifact("object_pose.json", object_pose_to_json(r.fit->pose));
    report["object"] = {{"mean_rms_px", r.object->mean_rms_px},
                        {"under_constrained", r.object->under_constrained},
                        {"fit_loss_m", r.fit->fit_loss},
                        {"smooth_loss_m", r.fit->smooth_loss},
                        {"scale", r.fit->pose.scale},
                        {"residual_m_per_frame", res}};
  }
  rec.artifact("recon_report.json", report);
  rec.finish();
  return r;
}

// ---------------------------------------------------------------------------
// fit-object-mask

struct MaskFitResult {
  std::vector<ChamferAlignResult> frames;
  ObjectPose pose;
};

/// First frame from random restarts, later frames refined from the previous
/// frame's pose.
inline MaskFitResult cmd_fit_object_mask(const Config& cfg, const fs::path& mesh_path,
                                         const std::vector<fs::path>& masks, const fs::path& out,
                                         int threads = 1) {
  cfg.validate();
  if (masks.empty()) throw SchemaError("fit-object-mask: no mask files given");
  RunRecorder rec("fit-object-mask", cfg, out, threads);
  rec.input(mesh_path);
  const TriMesh mesh = read_obj(mesh_path.string());
  MaskFitResult r;
  Rng rng(cfg.seed);
  std::optional<std::pair<Mat3, Vec3>> prev;
  Json frames = Json::array();
  for (const auto& p : masks) {
    rec.input(p);
    const MaskImage mask = read_pgm(p.string());
    const CameraIntrinsics intr{cfg.mask_fx, cfg.mask_fy, mask.width / 2.0, mask.height / 2.0,
                                static_cast<double>(mask.width), static_cast<double>(mask.height)};
    const auto fit = rec.stage(prev ? "refine" : "restarts",
                               [&] { return chamfer_align_frame(mesh, mask, intr, prev, rng, cfg.chamfer()); });
    if (!std::isfinite(fit.loss) || !fit.rotation.allFinite() || !fit.translation.allFinite()) {
      throw NumericalError("fit-object-mask: alignment diverged on " + p.string());
    }
    prev = std::make_pair(fit.rotation, fit.translation);
    r.frames.push_back(fit);
    r.pose.rot6d.push_back(matrix_to_rot6d(fit.rotation));
    r.pose.translation.push_back(fit.translation);
    frames.push_back({{"mask", p.filename().string()}, {"chamfer_px2", fit.loss}, {"restarts", fit.restarts_run}});
  }
  rec.artifact("object_pose.json", object_pose_to_json(r.pose));
  rec.artifact("mask_fit_report.json", Json{{"version", kFormatVersion}, {"frames", frames}});
  rec.finish();
  return r;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateInputs {
  std::vector<fs::path> pred, gt;            // Seq3D files
  std::vector<fs::path> pred_2d, gt_2d;      // optional motion files
  std::vector<fs::path> pred_obj, gt_obj;    // optional Seq3D object keypoints
};

inline MetricsReport cmd_evaluate(const Config& cfg, const EvaluateInputs& in, const fs::path& out,
                                  int threads = 1) {
  cfg.validate();
  auto same = [](const auto& a, const auto& b, const char* what) {
    if (a.size() != b.size()) {
      throw std::invalid_argument(std::string("evaluate: ") + what + " lists differ in length (" +
                                  std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
  };
  same(in.pred, in.gt, "pred/gt");
  if (in.pred.empty()) throw std::invalid_argument("evaluate: no sequences given");
  same(in.pred_2d, in.gt_2d, "2D pred/gt");
  same(in.pred_obj, in.gt_obj, "object pred/gt");
  if (!in.pred_2d.empty()) same(in.pred_2d, in.pred, "2D and 3D");
  if (!in.pred_obj.empty()) same(in.pred_obj, in.pred, "object and 3D");
  RunRecorder rec("evaluate", cfg, out, threads);
  for (const auto* list : {&in.pred, &in.gt, &in.pred_2d, &in.gt_2d, &in.pred_obj, &in.gt_obj}) {
    for (const auto& p : *list) rec.input(p);
  }

  MetricsReport report;
  report.sequences.resize(in.pred.size());
  auto one = [&](std::size_t i) {
    const Seq3D pred = seq3d_from_json(load_json(in.pred[i]), in.pred[i].string());
    const Seq3D gt = seq3d_from_json(load_json(in.gt[i]), in.gt[i].string());
    const SkeletonSpec skel = gt.joints == 17 ? SkeletonSpec::coco17() : SkeletonSpec::generic(gt.joints);
    std::optional<KeypointSeq2D> p2, g2;
    std::optional<Seq3D> po, go;
    if (!in.pred_2d.empty()) {
      p2 = split_human_object(motion_from_json(load_json(in.pred_2d[i]), in.pred_2d[i].string()), gt.joints).human;
      g2 = split_human_object(motion_from_json(load_json(in.gt_2d[i]), in.gt_2d[i].string()), gt.joints).human;
    }
    if (!in.pred_obj.empty()) {
      po = seq3d_from_json(load_json(in.pred_obj[i]), in.pred_obj[i].string());
      go = seq3d_from_json(load_json(in.gt_obj[i]), in.gt_obj[i].string());
    }
    MetricsRow row = evaluate_sequence(in.gt[i].stem().string(), pred, gt, skel, p2 ? &*p2 : nullptr,
                                       g2 ? &*g2 : nullptr, po ? &*po : nullptr, go ? &*go : nullptr);
    if (row.fs) row.fs = foot_sliding(pred, skel, cfg.fs_height);
    report.sequences[i] = row;
  };
  rec.stage("metrics", [&] {
    // Rows land in fixed slots, so the thread count never changes the output.
    const std::size_t n = in.pred.size();
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) one(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    try {
      for (std::size_t i = 0; i < n; i += workers) one(i);
    } catch (...) {
      errors[0] = std::current_exception();
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    return 0;
  });
  rec.artifact("metrics.json", metrics_to_json(report));
  rec.artifact("metrics.csv", metrics_to_csv(report));
  rec.finish();
  return report;
}

}  // namespace motionlift
