#pragma once

// Score-distillation lifting of a single-view sequence to V views with
// cross-view epipolar consistency.
//
// Optimized views live in canvas units and the decomposed layout, the same
// representation the denoiser is trained on. View 0 is the input and is never
// written.

#include <functional>
#include <memory>
#include <set>
#include <utility>
#include <vector>

#include "motionlift/camsim.hpp"
#include "motionlift/training.hpp"

namespace motionlift {

/// x0 prediction for one view at step n.
using ViewDenoiser = std::function<VecX(const VecX& xn, int n, int view)>;

/// Weight w(n) applied to the SDS residual.
using SdsWeight = std::function<double(int n, const NoiseSchedule&)>;

inline double sds_default_weight(int n, const NoiseSchedule& sched) {
  return 1.0 - sched.alpha_bar(n);
}

/// Inclusive step band [lo, hi] as fractions of N, clamped to [1, N].
inline std::pair<int, int> step_band(const NoiseSchedule& sched, double lo, double hi) {
  const int N = sched.steps();
  const int a = std::clamp(static_cast<int>(std::ceil(lo * N)), 1, N);
  const int b = std::clamp(static_cast<int>(std::floor(hi * N)), a, N);
  return {a, b};
}

/// One SDS residual draw for a free vector: w(n) (eps_hat - eps). The
/// denoiser Jacobian is not applied.
inline VecX sds_residual(const VecX& x, const X0Predictor& predict, const NoiseSchedule& sched,
                         Rng& rng, const SdsWeight& weight, std::pair<int, int> band) {
  const int n = uniform_int(rng, band.first, band.second);
  const VecX eps = normal_vector(x.size(), rng);
  const VecX xn = q_sample(x, n, eps, sched);
  const VecX eps_hat = x0_to_eps(xn, predict(xn, n), n, sched);
  return weight(n, sched) * (eps_hat - eps);
}

struct MultiViewState {
  SkeletonSpec skeleton;
  KeypointSeq2D input;                    // view 0, pixels
  std::vector<CameraTrajectory> cameras;  // V world-frame trajectories, [0] is the input's
  std::vector<VecX> views;                // [v] for v >= 1: canvas, decomposed layout; [0] unused
  int iteration = 0;
  std::vector<double> line_loss_history;  // pixel units, per iteration
  std::vector<double> objective_history;  // optimized objective (line part), canvas units

  int view_count() const { return static_cast<int>(cameras.size()); }
  int frames() const { return input.frames(); }
  int joints() const { return input.joints(); }

  /// Global pixel sequence of view v. Visibility follows the input.
  KeypointSeq2D global(int v) const {
    if (v == 0) {
      return input;
    }
    const CanvasMap canvas{cameras[v].intrinsics};
    KeypointSeq2D packed = input;
    packed.set_flat(views[v]);
    const KeypointSeq2D g = from_decomposed_layout(packed, skeleton, Vec2::Zero());
    return canvas.to_pixel(g.flat(), input);
  }

  void validate() const {
    const int V = view_count();
    require(V >= 2, "MultiViewState: need V >= 2");
    require(views.size() == static_cast<std::size_t>(V), "MultiViewState: one slot per view");
    for (int v = 0; v < V; ++v) {
      require(cameras[v].frames() == frames(), "MultiViewState: camera length must equal T");
      if (v > 0) {
        require(views[v].size() == 2 * static_cast<Eigen::Index>(frames()) * joints(),
                "MultiViewState: view size must be 2 T K");
      }
    }
  }
};

/// Unordered line-loss pairs for V views: ring-adjacent pairs among
/// 1..V-1 (cyclic, deduplicated) plus (0, v) for every v.
inline std::vector<std::pair<int, int>> line_loss_pairs(int views) {
  require(views >= 2, "line_loss_pairs: need V >= 2");
  std::set<std::pair<int, int>> ring;
  const int m = views - 1;
  if (m >= 2) {
    for (int i = 0; i < m; ++i) {
      const int a = 1 + i;
      const int b = 1 + (i + 1) % m;
      ring.insert({std::min(a, b), std::max(a, b)});
    }
  }
  std::vector<std::pair<int, int>> out;
  for (int v = 1; v < views; ++v) {
    out.push_back({0, v});
  }
  out.insert(out.end(), ring.begin(), ring.end());
  return out;
}

inline int line_pair_count(int views) { return static_cast<int>(line_loss_pairs(views).size()); }

/// Per-frame fundamental matrices from view u to view v.
inline std::vector<FundamentalMatrix> pair_fundamentals(const MultiViewState& s, int u, int v) {
  std::vector<FundamentalMatrix> fs;
  for (int t = 0; t < s.frames(); ++t) {
    fs.push_back(fundamental_matrix(relative_transform(s.cameras[u][t], s.cameras[v][t]),
                                    s.cameras[u].intrinsics, s.cameras[v].intrinsics));
  }
  return fs;
}

struct CrossViewLoss {
  double loss_px = 0.0;      // sum of pixel point-line distances
  double loss_canvas = 0.0;  // same sum measured in canvas units (optimized)
  VecX grad;                 // d loss_canvas / d views[v]
  int counted = 0;
};

/// Distances from view v's recomposed global keypoints to the epipolar lines
/// induced by view u, with the gradient on view v's decomposed variable.
inline CrossViewLoss cross_view_line_loss(const MultiViewState& s, int u, int v) {
  s.validate();
  require(u != v && u >= 0 && v >= 1 && u < s.view_count() && v < s.view_count(),
          "cross_view_line_loss: invalid view pair");
  const CameraIntrinsics& intr_v = s.cameras[v].intrinsics;
  const EpipolarLineSet px_lines = cross_view_epipolar_lines(s.global(u), pair_fundamentals(s, u, v));
  const KeypointSeq2D gv = s.global(v);
  CrossViewLoss out;
  const LineResidual px = point_line_residual(px_lines, gv);
  out.loss_px = px.loss;
  out.counted = px.counted;

  const CanvasMap canvas{intr_v};
  KeypointSeq2D gv_canvas = gv;
  gv_canvas.set_flat(canvas.to_canvas(gv));
  const LineResidual cv = point_line_residual(lines_to_canvas(px_lines, intr_v), gv_canvas);
  out.loss_canvas = cv.loss;
  out.grad = flatten(global_grad_to_decomposed(cv.gradient, s.skeleton, s.frames()));
  return out;
}

/// SDS residual for view v (1 <= v < V) under `denoiser`.
inline VecX sds_gradient(const MultiViewState& s, int v, const ViewDenoiser& denoiser,
                         const NoiseSchedule& sched, Rng& rng,
                         const SdsWeight& weight = sds_default_weight,
                         std::pair<int, int> band = {1, 0}) {
  require(v >= 1 && v < s.view_count(), "sds_gradient: view index must lie in [1, V-1]");
  if (band.second < band.first) {
    band = {1, sched.steps()};
  }
  auto predict = [&](const VecX& xn, int n) { return denoiser(xn, n, v); };
  return sds_residual(s.views[v], predict, sched, rng, weight, band);
}

enum class LiftOptimizer { kAdam, kMonotoneDescent };

struct LiftConfig {
  int views = 4;
  int iterations = 500;
  double lr = 0.01;
  double lr_floor = 0.0;  // final lr as a fraction of lr (cosine decay)
  double sds_weight = 1.0;
  double line_weight = 0.01;
  int draws = 1;            // SDS residual draws averaged per iteration
  double band_lo = 0.05;
  double band_hi = 0.8;
  LiftOptimizer optimizer = LiftOptimizer::kAdam;
  std::uint64_t seed = 0;

  void validate() const {
    require(views >= 2, "LiftConfig: views must be >= 2");
    require(iterations >= 0 && lr > 0.0 && draws >= 1, "LiftConfig: invalid optimizer settings");
    require(lr_floor >= 0.0 && lr_floor <= 1.0, "LiftConfig: lr_floor must lie in [0, 1]");
    require(0.0 <= band_lo && band_lo <= band_hi && band_hi <= 1.0,
            "LiftConfig: band must satisfy 0 <= lo <= hi <= 1");
  }
};

/// Starting state: ring cameras around the subject and views initialized
/// from the input's local pose with the hip midpoint moved to the canvas
/// center.
inline MultiViewState init_multiview_state(const KeypointSeq2D& input,
                                           const CameraTrajectory& input_cam,
                                           const SkeletonSpec& skel, int views,
                                           const Vec3& subject_center, double radius) {
  input.validate();
  skel.validate(input.joints());
  require(input_cam.frames() == input.frames(), "lift: camera length must equal T");
  MultiViewState s;
  s.skeleton = skel;
  s.input = input;
  s.cameras.push_back(input_cam);
  for (auto& c : ring_views(input_cam, views, subject_center, radius)) {
    s.cameras.push_back(std::move(c));
  }
  s.views.assign(views, VecX());
  for (int v = 1; v < views; ++v) {
    const CanvasMap canvas{s.cameras[v].intrinsics};
    KeypointSeq2D c = input;
    c.set_flat(canvas.to_canvas(input));
    KeypointSeq2D packed = to_decomposed_layout(c, skel, Vec2::Zero());
    for (int t = 0; t < input.frames(); ++t) {
      const Vec2 mid = 0.5 * (packed.at(t, skel.left_hip) + packed.at(t, skel.right_hip));
      packed.at(t, skel.left_hip) -= mid;
      packed.at(t, skel.right_hip) -= mid;
    }
    s.views[v] = packed.flat();
  }
  return s;
}

/// Denoiser conditioning for a lifted view: its own camera and the lines
/// induced by the input view.
inline Conditioning lift_conditioning(const MultiViewState& s, int v) {
  const EpipolarLineSet lines = cross_view_epipolar_lines(s.input, pair_fundamentals(s, 0, v));
  return Conditioning::make(s.cameras[v], lines, s.frames(), s.joints());
}

/// Wraps trained parameters as a per-view denoiser for `s`.
inline ViewDenoiser make_view_denoiser(const DenoiserParams& params, const MultiViewState& s) {
  auto conds = std::make_shared<std::vector<Conditioning>>();
  conds->push_back(Conditioning{});
  for (int v = 1; v < s.view_count(); ++v) {
    conds->push_back(lift_conditioning(s, v));
  }
  return [&params, conds](const VecX& xn, int n, int v) {
    return denoiser_forward(params, xn, (*conds)[v], n);
  };
}

namespace detail {

inline double total_line_objective(const MultiViewState& s,
                                   const std::vector<std::pair<int, int>>& pairs,
                                   std::vector<VecX>* grads, double* loss_px) {
  double obj = 0.0;
  double px = 0.0;
  for (auto [a, b] : pairs) {
    // Input pairs pull only the lifted view; ring pairs act both ways.
    std::vector<std::pair<int, int>> directed{{a, b}};
    if (a != 0) {
      directed.push_back({b, a});
    }
    for (auto [u, v] : directed) {
      const CrossViewLoss l = cross_view_line_loss(s, u, v);
      obj += l.loss_canvas;
      px += l.loss_px;
      if (grads) {
        (*grads)[v] += l.grad;
      }
    }
  }
  if (loss_px) *loss_px = px;
  return obj;
}

}  // namespace detail

/// Runs SDS plus cross-view line matching on views 1..V-1.
///
/// `line_loss_history` records the summed pixel line loss over all directed
/// pairs at the start of each iteration (and once more at the end). With
/// kMonotoneDescent only the line term is optimized, by gradient steps with
/// backtracking, so the recorded objective never increases.
inline MultiViewState lift_single_to_multi(MultiViewState s, const ViewDenoiser& denoiser,
                                           const NoiseSchedule& sched, const LiftConfig& cfg) {
  cfg.validate();
  s.validate();
  const int V = s.view_count();
  const auto pairs = line_loss_pairs(V);
  const auto band = step_band(sched, cfg.band_lo, cfg.band_hi);
  Rng rng(cfg.seed);
  std::vector<AdamState> adam;
  for (int v = 0; v < V; ++v) {
    adam.push_back(AdamState::zeros(v == 0 ? 0 : s.views[v].size()));
  }
  double step = cfg.lr;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<VecX> grads(V);
    for (int v = 1; v < V; ++v) grads[v] = VecX::Zero(s.views[v].size());
    double px = 0.0;
    const double obj = detail::total_line_objective(s, pairs, &grads, &px);
    s.line_loss_history.push_back(px);
    s.objective_history.push_back(obj);

    if (cfg.optimizer == LiftOptimizer::kMonotoneDescent) {
      // Backtracking on the line objective alone.
      for (int tries = 0; tries < 40; ++tries) {
        MultiViewState trial = s;
        for (int v = 1; v < V; ++v) trial.views[v] -= step * cfg.line_weight * grads[v];
        const double next = detail::total_line_objective(trial, pairs, nullptr, nullptr);
        if (next <= obj) {
          s.views = std::move(trial.views);
          step *= 1.5;
          break;
        }
        step *= 0.5;
      }
    } else {
      const double lr = cosine_lr(cfg.lr, it, cfg.iterations, cfg.lr_floor);
      for (int v = 1; v < V; ++v) {
        VecX g = cfg.line_weight * grads[v];
        if (cfg.sds_weight != 0.0) {
          VecX r = VecX::Zero(g.size());
          for (int d = 0; d < cfg.draws; ++d) {
            r += sds_gradient(s, v, denoiser, sched, rng, sds_default_weight, band);
          }
          g += cfg.sds_weight / cfg.draws * r;
        }
        adam_step(s.views[v], g, adam[v], {lr});
      }
    }
    ++s.iteration;
  }
  double px = 0.0;
  s.objective_history.push_back(detail::total_line_objective(s, pairs, nullptr, &px));
  s.line_loss_history.push_back(px);
  return s;
}

}  // namespace motionlift
