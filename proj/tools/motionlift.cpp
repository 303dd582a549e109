#include <CLI11.hpp>

#include <iostream>

#include "motionlift/pipeline.hpp"

using namespace motionlift;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  int threads = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value config file");
  app->add_option("--seed", c.seed, "overrides the config seed");
  app->add_option("--out", c.out, "output directory")->capture_default_str();
  app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

Config resolve(const Common& c) {
  Config cfg = c.config.empty() ? Config{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motionlift: lift 2D keypoint sequences to multi-view and 3D"};
  app.require_subcommand(1);
  Common common;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  add_common(sim, common);

  std::string dataset, resume;
  auto* tsv = app.add_subcommand("train-sv", "train the single-view denoiser");
  auto* tmv = app.add_subcommand("train-mv", "train the multi-view denoiser");
  for (auto* t : {tsv, tmv}) {
    add_common(t, common);
    t->add_option("--data", dataset, "dataset directory from simulate")->required();
    t->add_option("--resume", resume, "checkpoint to continue from");
  }

  LiftInputs lift_in;
  std::string canonical;
  std::optional<int> stage;
  auto* lift = app.add_subcommand("lift", "lift one view into a multi-view bundle");
  add_common(lift, common);
  lift->add_option("--motion", lift_in.motion, "input motion.json")->required();
  lift->add_option("--camera", lift_in.camera, "input camera.json")->required();
  lift->add_option("--checkpoint", lift_in.checkpoint, "trained checkpoint")->required();
  lift->add_option("--stage", stage, "1 (SDS) or 2 (multi-view sampling)")->check(CLI::Range(1, 2));
  lift->add_option("--human-joints", lift_in.human_joints, "leading human joints; the rest are object keypoints");
  lift->add_option("--canonical", canonical, "canonical object keypoints");

  std::string bundle;
  auto* recon = app.add_subcommand("reconstruct", "triangulate a bundle and fit the object");
  add_common(recon, common);
  recon->add_option("--bundle", bundle, "bundle.json")->required();

  std::string mesh;
  std::vector<std::string> masks;
  auto* mask = app.add_subcommand("fit-object-mask", "fit an object pose per frame to silhouettes");
  add_common(mask, common);
  mask->add_option("--mesh", mesh, "object mesh (.obj)")->required();
  mask->add_option("--masks", masks, "binary PGM masks in frame order")->required();

  EvaluateInputs ev;
  auto* eval = app.add_subcommand("evaluate", "compute metrics against ground truth");
  add_common(eval, common);
  eval->add_option("--pred", ev.pred, "predicted seq3d files")->required();
  eval->add_option("--gt", ev.gt, "ground-truth seq3d files")->required();
  eval->add_option("--pred-2d", ev.pred_2d, "predicted motion files");
  eval->add_option("--gt-2d", ev.gt_2d, "ground-truth motion files");
  eval->add_option("--pred-obj", ev.pred_obj, "predicted object keypoints");
  eval->add_option("--gt-obj", ev.gt_obj, "ground-truth object keypoints");

  CLI11_PARSE(app, argc, argv);

  try {
    Config cfg = resolve(common);
    const fs::path out = common.out;
    const int th = common.threads;
    if (sim->parsed()) {
      cmd_simulate(cfg, out, th);
    } else if (tsv->parsed() || tmv->parsed()) {
      std::optional<fs::path> r;
      if (!resume.empty()) r = resume;
      const auto s = cmd_train(cfg, dataset, out, tmv->parsed(), r, th);
      std::cout << "eval loss " << s.eval_before << " -> " << s.eval_after << "\n";
    } else if (lift->parsed()) {
      if (stage) cfg.lift_stage = *stage;
      if (!canonical.empty()) lift_in.canonical = fs::path(canonical);
      cmd_lift(cfg, lift_in, out, th);
    } else if (recon->parsed()) {
      cmd_reconstruct(cfg, bundle, out, th);
    } else if (mask->parsed()) {
      cmd_fit_object_mask(cfg, mesh, std::vector<fs::path>(masks.begin(), masks.end()), out, th);
    } else if (eval->parsed()) {
      const auto rep = cmd_evaluate(cfg, ev, out, th);
      std::cout << metrics_to_csv(rep);
    }
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
