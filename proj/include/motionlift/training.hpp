#pragma once

// Hybrid-source training loss (masked L1 plus line matching on the
// recomposed global prediction) and the Adam optimizer.

#include <algorithm>
#include <numbers>
#include <optional>
#include <vector>

#include "motionlift/denoiser.hpp"
#include "motionlift/diffusion.hpp"
#include "motionlift/motion.hpp"
#include "motionlift/optim.hpp"

namespace motionlift {

enum class DataSource { kVideoGlobal, kReprojectedLocal };

/// One training sequence, already in canvas units and decomposed layout.
struct TrainingItem {
  VecX target;  // X_0, flat T*K*2
  DataSource source = DataSource::kVideoGlobal;
  Conditioning cond;
  std::vector<unsigned char> joint_mask;  // K entries
  std::vector<unsigned char> visibility;  // T*K entries
};

struct TrainingBatch {
  SkeletonSpec skeleton;
  std::vector<TrainingItem> items;

  void validate() const {
    if (items.empty()) {
      throw std::invalid_argument("TrainingBatch: empty batch");
    }
    const int K = skeleton.joints();
    for (const auto& it : items) {
      it.cond.validate();
      require(it.cond.joints == K && it.joint_mask.size() == static_cast<std::size_t>(K) &&
                  it.visibility.size() == static_cast<std::size_t>(it.cond.frames) * K &&
                  it.target.size() == 2 * static_cast<Eigen::Index>(it.cond.frames) * K,
              "TrainingBatch: item shapes disagree");
      if (it.source == DataSource::kReprojectedLocal &&
          (it.joint_mask[skeleton.left_hip] || it.joint_mask[skeleton.right_hip])) {
        throw std::invalid_argument("TrainingBatch: reprojected_local item must mask the hips");
      }
    }
  }
};

/// Joint mask for a source: all joints for video data, hips excluded for
/// reprojected local poses.
inline std::vector<unsigned char> source_mask(DataSource src, const SkeletonSpec& skel) {
  if (src == DataSource::kReprojectedLocal) {
    return hip_exclusion_mask(skel, skel.joints());
  }
  return std::vector<unsigned char>(skel.joints(), 1);
}

/// Builds a training item from a pixel-space sequence and its camera.
///
/// Coordinates move to canvas units and the decomposed layout. Visible
/// entries are dropped at `drop_rate`. Video items are conditioned on lines
/// through every kept keypoint and `epipole` (pixel, homogeneous); reprojected
/// items carry no lines and mask the hips.
inline TrainingItem make_training_item(const KeypointSeq2D& seq, const CameraTrajectory& traj,
                                       const SkeletonSpec& skel, DataSource source,
                                       const std::optional<Vec3>& epipole, double drop_rate,
                                       Rng& rng) {
  skel.validate(seq.joints());
  const CanvasMap canvas{traj.intrinsics};
  KeypointSeq2D kept = seq;
  kept.visibility() = random_drop_mask(seq.visibility(), drop_rate, rng);
  TrainingItem it;
  it.source = source;
  it.visibility = kept.visibility();
  it.joint_mask = source_mask(source, skel);
  KeypointSeq2D canvas_seq = seq;
  canvas_seq.set_flat(canvas.to_canvas(seq));
  it.target = to_decomposed_layout(canvas_seq, skel, Vec2::Zero()).flat();
  EpipolarLineSet lines;
  if (source == DataSource::kVideoGlobal && epipole) {
    lines = training_epipolar_lines(kept, *epipole);
  }
  it.cond = Conditioning::make(traj, lines, seq.frames(), seq.joints());
  return it;
}

struct TrainingLossResult {
  double loss = 0.0;
  double l1 = 0.0;    // mean over items
  double line = 0.0;  // mean over video items, unweighted
  VecX grad;          // d loss / d theta
  std::vector<VecX> prediction_grads;  // d loss / d prediction, per item
  std::vector<int> steps;              // sampled n per item
};

namespace detail {

/// Loss and d/d(prediction) for one item at a fixed prediction.
inline double item_loss(const TrainingItem& it, const SkeletonSpec& skel, const VecX& pred,
                        double line_weight, VecX& grad, double* l1_out, double* line_out) {
  const int T = it.cond.frames;
  const int K = it.cond.joints;
  grad = VecX::Zero(pred.size());
  int count = 0;
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) {
      if (it.joint_mask[k] && it.visibility[static_cast<std::size_t>(t) * K + k]) {
        count += 2;
      }
    }
  }
  double l1 = 0.0;
  if (count > 0) {
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < K; ++k) {
        if (!(it.joint_mask[k] && it.visibility[static_cast<std::size_t>(t) * K + k])) {
          continue;
        }
        for (int c = 0; c < 2; ++c) {
          const Eigen::Index i = 2 * (static_cast<Eigen::Index>(t) * K + k) + c;
          const double d = pred[i] - it.target[i];
          l1 += std::abs(d);
          grad[i] = sign(d) / count;
        }
      }
    }
    l1 /= count;
  }
  double line = 0.0;
  if (it.source == DataSource::kVideoGlobal && line_weight != 0.0) {
    KeypointSeq2D packed(T, K);
    packed.set_flat(pred);
    packed.visibility() = it.visibility;
    KeypointSeq2D global = from_decomposed_layout(packed, skel, Vec2::Zero());
    const LineResidual res = point_line_residual(it.cond.lines, global);
    if (res.counted > 0) {
      line = res.loss / res.counted;
      std::vector<Vec2> g = res.gradient;
      for (auto& e : g) {
        e *= line_weight / res.counted;
      }
      grad += flatten(global_grad_to_decomposed(g, skel, T));
    }
  }
  if (l1_out) *l1_out = l1;
  if (line_out) *line_out = line;
  return l1 + line_weight * line;
}

}  // namespace detail

/// Draws n ~ U{1..N} and eps per item, predicts X_0 and evaluates the masked
/// L1 loss plus `line_weight` times the mean point-line distance of the
/// recomposed prediction (video items only). Averages over items.
inline TrainingLossResult training_loss(const DenoiserParams& params, const TrainingBatch& batch,
                                        const NoiseSchedule& sched, Rng& rng, double line_weight) {
  batch.validate();
  TrainingLossResult r;
  r.grad = VecX::Zero(params.theta().size());
  const double inv_b = 1.0 / static_cast<double>(batch.items.size());
  int video_items = 0;
  for (const auto& it : batch.items) {
    const int n = uniform_int(rng, 1, sched.steps());
    const VecX eps = normal_vector(it.target.size(), rng);
    const VecX xn = q_sample(it.target, n, eps, sched);
    DenoiserCache cache;
    const VecX pred = denoiser_forward(params, xn, it.cond, n, &cache);
    VecX gpred;
    double l1 = 0.0;
    double line = 0.0;
    const double li = detail::item_loss(it, batch.skeleton, pred, line_weight, gpred, &l1, &line);
    r.loss += inv_b * li;
    r.l1 += inv_b * l1;
    if (it.source == DataSource::kVideoGlobal) {
      r.line += line;
      ++video_items;
    }
    gpred *= inv_b;
    r.grad += denoiser_backward(params, cache, gpred).params;
    r.prediction_grads.push_back(std::move(gpred));
    r.steps.push_back(n);
  }
  if (video_items > 0) {
    r.line /= video_items;
  }
  return r;
}

/// Multi-view training sample: V views of one motion, each with its own
/// conditioning; views share a single step n.
struct MultiViewItem {
  std::vector<VecX> targets;
  std::vector<Conditioning> cond;
  std::vector<std::vector<unsigned char>> visibility;  // per view, T*K
};

/// Mean over items and views of the visibility-masked L1 error.
inline TrainingLossResult multiview_training_loss(const DenoiserParams& params,
                                                  const std::vector<MultiViewItem>& batch,
                                                  const NoiseSchedule& sched, Rng& rng) {
  require(!batch.empty(), "multiview_training_loss: empty batch");
  TrainingLossResult r;
  r.grad = VecX::Zero(params.theta().size());
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& it : batch) {
    const int views = static_cast<int>(it.targets.size());
    const int n = uniform_int(rng, 1, sched.steps());
    std::vector<VecX> xn;
    std::vector<const Conditioning*> cond;
    for (int v = 0; v < views; ++v) {
      xn.push_back(q_sample(it.targets[v], n, normal_vector(it.targets[v].size(), rng), sched));
      cond.push_back(&it.cond[v]);
    }
    DenoiserCache cache;
    const auto pred = multiview_denoiser_forward(params, xn, cond, n, &cache);
    std::vector<VecX> gpred(views);
    double item = 0.0;
    for (int v = 0; v < views; ++v) {
      gpred[v] = VecX::Zero(pred[v].size());
      const auto& vis = it.visibility[v];
      const int count = 2 * static_cast<int>(std::count(vis.begin(), vis.end(), 1));
      if (count == 0) {
        continue;
      }
      double l1 = 0.0;
      for (std::size_t e = 0; e < vis.size(); ++e) {
        if (!vis[e]) continue;
        for (int c = 0; c < 2; ++c) {
          const Eigen::Index i = 2 * static_cast<Eigen::Index>(e) + c;
          const double d = pred[v][i] - it.targets[v][i];
          l1 += std::abs(d);
          gpred[v][i] = sign(d) * inv_b / (count * views);
        }
      }
      item += l1 / count / views;
    }
    r.loss += inv_b * item;
    r.l1 += inv_b * item;
    r.grad += denoiser_backward(params, cache, gpred).params;
    r.steps.push_back(n);
  }
  return r;
}

}  // namespace motionlift
