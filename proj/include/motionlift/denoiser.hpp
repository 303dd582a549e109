#pragma once

// Compact conditional x0-predicting denoiser with exact reverse-mode
// gradients.
//
// Per frame, the noisy keypoints (2K), the normalized camera extrinsic (12),
// the epipolar lines (3K) and a sinusoidal step embedding are concatenated and
// encoded to width H. D residual temporal-convolution layers (kernel 3, zero
// padded, non-causal) follow; in the multi-view variant each layer is followed
// by attention across the other views of the same frame. A linear head maps
// back to 2K coordinates.

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "motionlift/camera.hpp"
#include "motionlift/epipolar.hpp"

namespace motionlift {

using MatX = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Canvas units

/// Pixel <-> canvas mapping: u = (x - cx) / (w / 2), v = (y - cy) / (h / 2).
struct CanvasMap {
  CameraIntrinsics intr;

  double sx() const { return intr.width / 2.0; }
  double sy() const { return intr.height / 2.0; }

  Vec2 to_canvas(const Vec2& p) const { return {(p.x() - intr.cx) / sx(), (p.y() - intr.cy) / sy()}; }
  Vec2 to_pixel(const Vec2& u) const { return {intr.cx + u.x() * sx(), intr.cy + u.y() * sy()}; }

  VecX to_canvas(const KeypointSeq2D& seq) const {
    VecX v = seq.flat();
    for (Eigen::Index i = 0; i < v.size(); i += 2) {
      v[i] = (v[i] - intr.cx) / sx();
      v[i + 1] = (v[i + 1] - intr.cy) / sy();
    }
    return v;
  }

  /// Writes canvas coordinates back into `like`'s shape and visibility.
  KeypointSeq2D to_pixel(const VecX& u, const KeypointSeq2D& like) const {
    KeypointSeq2D out = like;
    VecX v = u;
    for (Eigen::Index i = 0; i < v.size(); i += 2) {
      v[i] = intr.cx + v[i] * sx();
      v[i + 1] = intr.cy + v[i + 1] * sy();
    }
    out.set_flat(v);
    return out;
  }

  /// Converts d/d(pixel) into d/d(canvas), in place on a flat vector.
  void pixel_grad_to_canvas(VecX& g) const {
    for (Eigen::Index i = 0; i < g.size(); i += 2) {
      g[i] *= sx();
      g[i + 1] *= sy();
    }
  }
};

inline VecX flatten(const std::vector<Vec2>& pts) {
  VecX v(2 * static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    v[2 * i] = pts[i].x();
    v[2 * i + 1] = pts[i].y();
  }
  return v;
}

inline std::vector<Vec2> unflatten(const VecX& v) {
  std::vector<Vec2> out(static_cast<std::size_t>(v.size() / 2));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = Vec2(v[2 * i], v[2 * i + 1]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conditioning

/// Per-view conditioning: normalized extrinsics (12 numbers per frame) and
/// epipolar lines in canvas units. Invalid lines are zero rows.
struct Conditioning {
  int frames = 0;
  int joints = 0;
  std::vector<std::array<double, 12>> camera;
  EpipolarLineSet lines;

  void validate() const {
    require(camera.size() == static_cast<std::size_t>(frames),
            "Conditioning: camera length must equal T");
    require(lines.frames() == frames && lines.joints() == joints,
            "Conditioning: line set shape must equal T x K");
  }

  /// `pixel_lines` may be empty (all lines invalid).
  static Conditioning make(const CameraTrajectory& traj, const EpipolarLineSet& pixel_lines,
                           int frames, int joints) {
    require(traj.frames() == frames, "Conditioning: camera trajectory length must equal T");
    Conditioning c;
    c.frames = frames;
    c.joints = joints;
    const CameraTrajectory norm = normalize_trajectory(traj);
    for (const auto& e : norm.extrinsics) {
      c.camera.push_back(e.to_row_major());
    }
    c.lines = pixel_lines.frames() == 0 ? EpipolarLineSet(frames, joints)
                                        : lines_to_canvas(pixel_lines, traj.intrinsics);
    c.validate();
    return c;
  }
};

// ---------------------------------------------------------------------------
// Parameters

struct DenoiserShape {
  int joints = 17;
  int hidden = 64;
  int depth = 2;
  int step_dim = 32;
  bool cross_view = false;

  int input_dim() const { return 2 * joints + 12 + 3 * joints + step_dim; }
  int output_dim() const { return 2 * joints; }

  /// H*in + H + D(3H^2 + H) + [D * 4H^2] + 2K*H + 2K.
  Eigen::Index parameter_count() const {
    const Eigen::Index h = hidden;
    Eigen::Index n = h * input_dim() + h;
    n += depth * (3 * h * h + h);
    if (cross_view) {
      n += depth * 4 * h * h;
    }
    n += static_cast<Eigen::Index>(output_dim()) * h + output_dim();
    return n;
  }

  void validate() const {
    require(joints >= 1 && hidden >= 1 && depth >= 0 && step_dim >= 2 && step_dim % 2 == 0,
            "DenoiserShape: invalid dimensions");
  }

  bool operator==(const DenoiserShape&) const = default;
};

/// Flat parameter vector with typed views into its blocks.
class DenoiserParams {
 public:
  using ConstMap = Eigen::Map<const MatX>;
  using MutMap = Eigen::Map<MatX>;

  DenoiserParams() = default;
  explicit DenoiserParams(const DenoiserShape& shape)
      : shape_(shape), theta_(VecX::Zero(shape.parameter_count())) {
    shape.validate();
  }

  /// Scaled-normal init (std 1/sqrt(fan_in)); the head starts smaller.
  static DenoiserParams random(const DenoiserShape& shape, Rng& rng) {
    DenoiserParams p(shape);
    const int h = shape.hidden;
    auto fill = [&](Eigen::Index offset, Eigen::Index count, double stddev) {
      for (Eigen::Index i = 0; i < count; ++i) {
        p.theta_[offset + i] = stddev * standard_normal(rng);
      }
    };
    fill(p.w_in_offset(), static_cast<Eigen::Index>(h) * shape.input_dim(),
         1.0 / std::sqrt(shape.input_dim()));
    for (int l = 0; l < shape.depth; ++l) {
      fill(p.conv_offset(l), 3 * static_cast<Eigen::Index>(h) * h, 0.5 / std::sqrt(3.0 * h));
      if (shape.cross_view) {
        fill(p.cross_offset(l), 4 * static_cast<Eigen::Index>(h) * h, 0.5 / std::sqrt(h));
      }
    }
    fill(p.w_out_offset(), static_cast<Eigen::Index>(shape.output_dim()) * h,
         0.1 / std::sqrt(h));
    return p;
  }

  const DenoiserShape& shape() const { return shape_; }
  const VecX& theta() const { return theta_; }
  VecX& theta() { return theta_; }

  /// Content hash; forward caches remember it so stale caches are caught.
  std::uint64_t fingerprint() const {
    return fnv1a(theta_.data(), sizeof(double) * static_cast<std::size_t>(theta_.size()));
  }

  // Block offsets, in storage order.
  Eigen::Index w_in_offset() const { return 0; }
  Eigen::Index b_in_offset() const {
    return static_cast<Eigen::Index>(shape_.hidden) * shape_.input_dim();
  }
  Eigen::Index conv_offset(int layer) const {
    const Eigen::Index h = shape_.hidden;
    return b_in_offset() + h + layer * (3 * h * h + h);
  }
  Eigen::Index conv_bias_offset(int layer) const {
    const Eigen::Index h = shape_.hidden;
    return conv_offset(layer) + 3 * h * h;
  }
  Eigen::Index cross_offset(int layer) const {
    const Eigen::Index h = shape_.hidden;
    return conv_offset(shape_.depth) + layer * 4 * h * h;
  }
  Eigen::Index w_out_offset() const {
    const Eigen::Index h = shape_.hidden;
    return conv_offset(shape_.depth) + (shape_.cross_view ? shape_.depth * 4 * h * h : 0);
  }
  Eigen::Index b_out_offset() const {
    return w_out_offset() + static_cast<Eigen::Index>(shape_.output_dim()) * shape_.hidden;
  }

  ConstMap block(Eigen::Index offset, Eigen::Index rows, Eigen::Index cols) const {
    return ConstMap(theta_.data() + offset, rows, cols);
  }

  /// Zeroes every cross-view attention weight.
  void zero_cross_view() {
    if (!shape_.cross_view) {
      return;
    }
    const Eigen::Index h = shape_.hidden;
    theta_.segment(cross_offset(0), shape_.depth * 4 * h * h).setZero();
  }

 private:
  DenoiserShape shape_;
  VecX theta_;
};

/// Sinusoidal embedding of the diffusion step.
inline VecX step_embedding(int n, int dim) {
  VecX e(dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
    e[i] = std::sin(n * freq);
    e[half + i] = std::cos(n * freq);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace detail {

struct CrossFrameCache {
  MatX h_in, q, k, v, attn, ctx;  // H x V, ..., attn V x V
};

struct LayerCache {
  MatX h_in;   // H x T, input to the temporal conv
  MatX act;    // H x T, tanh output
  std::vector<CrossFrameCache> cross;  // per frame; empty when unused
};

struct ViewCache {
  MatX features;  // in x T
  MatX h0;        // H x T
};

// z_t = W_{-1} h_{t-1} + W_0 h_t + W_{+1} h_{t+1}, zero padded.
inline MatX temporal_conv(const DenoiserParams& p, int layer, const MatX& h) {
  const Eigen::Index hd = p.shape().hidden;
  const Eigen::Index T = h.cols();
  const Eigen::Index off = p.conv_offset(layer);
  auto w_prev = p.block(off, hd, hd);
  auto w_mid = p.block(off + hd * hd, hd, hd);
  auto w_next = p.block(off + 2 * hd * hd, hd, hd);
  MatX z = w_mid * h;
  if (T > 1) {
    z.rightCols(T - 1).noalias() += w_prev * h.leftCols(T - 1);
    z.leftCols(T - 1).noalias() += w_next * h.rightCols(T - 1);
  }
  z.colwise() += Eigen::Map<const VecX>(p.theta().data() + p.conv_bias_offset(layer), hd);
  return z;
}

}  // namespace detail

/// Activations kept for the backward pass.
struct DenoiserCache {
  std::uint64_t fingerprint = 0;
  int views = 0;
  int frames = 0;
  std::vector<detail::ViewCache> view;
  std::vector<std::vector<detail::LayerCache>> layers;  // [view][layer]
  std::vector<MatX> h_final;                            // per view, H x T
  bool valid() const { return views > 0; }
};

struct DenoiserGradients {
  VecX params;
  std::vector<VecX> inputs;  // d loss / d x_n, per view
};

/// Multi-view forward pass. All views share T and step n. With a single view
/// (or without cross-view weights) each view is processed independently.
inline std::vector<VecX> multiview_denoiser_forward(const DenoiserParams& p,
                                                    const std::vector<VecX>& xn,
                                                    const std::vector<const Conditioning*>& cond,
                                                    int n, DenoiserCache* cache = nullptr) {
  const DenoiserShape& s = p.shape();
  const int views = static_cast<int>(xn.size());
  require(views >= 1 && cond.size() == xn.size(), "denoiser: need one conditioning per view");
  const int T = cond[0]->frames;
  for (int v = 0; v < views; ++v) {
    if (cond[v]->frames != T) {
      throw std::invalid_argument("denoiser: views disagree on frame count");
    }
    if (cond[v]->joints != s.joints || xn[v].size() != static_cast<Eigen::Index>(T) * s.output_dim()) {
      throw std::invalid_argument("denoiser: input shape does not match parameters");
    }
  }
  const Eigen::Index H = s.hidden;
  const Eigen::Index K = s.joints;
  const VecX emb = step_embedding(n, s.step_dim);
  auto w_in = p.block(p.w_in_offset(), H, s.input_dim());
  Eigen::Map<const VecX> b_in(p.theta().data() + p.b_in_offset(), H);

  DenoiserCache local;
  DenoiserCache& c = cache ? *cache : local;
  c = DenoiserCache{};
  c.fingerprint = p.fingerprint();
  c.views = views;
  c.frames = T;
  c.view.resize(views);
  c.layers.assign(views, std::vector<detail::LayerCache>(s.depth));

  std::vector<MatX> h(views);
  for (int v = 0; v < views; ++v) {
    MatX f(s.input_dim(), T);
    for (int t = 0; t < T; ++t) {
      f.col(t).segment(0, 2 * K) = xn[v].segment(static_cast<Eigen::Index>(t) * 2 * K, 2 * K);
      for (int i = 0; i < 12; ++i) {
        f(2 * K + i, t) = cond[v]->camera[t][i];
      }
      for (int k = 0; k < K; ++k) {
        f.col(t).segment(2 * K + 12 + 3 * k, 3) = cond[v]->lines.at(t, k);
      }
      f.col(t).tail(s.step_dim) = emb;
    }
    MatX z = w_in * f;
    z.colwise() += b_in;
    h[v] = z.array().tanh().matrix();
    c.view[v].features = std::move(f);
    c.view[v].h0 = h[v];
  }

  const bool mix = s.cross_view && views > 1;
  const double scale = 1.0 / std::sqrt(static_cast<double>(H));
  for (int l = 0; l < s.depth; ++l) {
    for (int v = 0; v < views; ++v) {
      auto& lc = c.layers[v][l];
      lc.h_in = h[v];
      lc.act = detail::temporal_conv(p, l, h[v]).array().tanh().matrix();
      h[v] += lc.act;
    }
    if (!mix) {
      continue;
    }
    const Eigen::Index off = p.cross_offset(l);
    auto wq = p.block(off, H, H);
    auto wk = p.block(off + H * H, H, H);
    auto wv = p.block(off + 2 * H * H, H, H);
    auto wo = p.block(off + 3 * H * H, H, H);
    auto& frames_cache = c.layers[0][l].cross;
    frames_cache.resize(T);
    for (int t = 0; t < T; ++t) {
      detail::CrossFrameCache& fc = frames_cache[t];
      fc.h_in.resize(H, views);
      for (int v = 0; v < views; ++v) {
        fc.h_in.col(v) = h[v].col(t);
      }
      fc.q = wq * fc.h_in;
      fc.k = wk * fc.h_in;
      fc.v = wv * fc.h_in;
      MatX scores = scale * (fc.q.transpose() * fc.k);  // [v][u]
      fc.attn = MatX::Zero(views, views);
      for (int v = 0; v < views; ++v) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int u = 0; u < views; ++u) {
          if (u != v) {
            mx = std::max(mx, scores(v, u));
          }
        }
        double sum = 0.0;
        for (int u = 0; u < views; ++u) {
          if (u != v) {
            fc.attn(v, u) = std::exp(scores(v, u) - mx);
            sum += fc.attn(v, u);
          }
        }
        fc.attn.row(v) /= sum;
      }
      fc.ctx = fc.v * fc.attn.transpose();  // ctx_v = sum_u attn(v,u) val_u
      const MatX out = fc.h_in + wo * fc.ctx;
      for (int v = 0; v < views; ++v) {
        h[v].col(t) = out.col(v);
      }
    }
  }

  auto w_out = p.block(p.w_out_offset(), s.output_dim(), H);
  Eigen::Map<const VecX> b_out(p.theta().data() + p.b_out_offset(), s.output_dim());
  std::vector<VecX> out(views);
  c.h_final = h;
  for (int v = 0; v < views; ++v) {
    MatX y = w_out * h[v];
    y.colwise() += b_out;
    out[v] = Eigen::Map<const VecX>(y.data(), y.size());
  }
  return out;
}

inline VecX denoiser_forward(const DenoiserParams& p, const VecX& xn, const Conditioning& cond,
                             int n, DenoiserCache* cache = nullptr) {
  return multiview_denoiser_forward(p, {xn}, {&cond}, n, cache)[0];
}

/// Exact reverse-mode gradients for the pass recorded in `cache`.
inline DenoiserGradients denoiser_backward(const DenoiserParams& p, const DenoiserCache& c,
                                           const std::vector<VecX>& grad_out) {
  if (!c.valid() || c.fingerprint != p.fingerprint()) {
    throw std::logic_error("denoiser_backward: stale or empty forward cache");
  }
  require(grad_out.size() == static_cast<std::size_t>(c.views),
          "denoiser_backward: need one output gradient per view");
  const DenoiserShape& s = p.shape();
  const Eigen::Index H = s.hidden;
  const Eigen::Index K = s.joints;
  const int T = c.frames;
  const int views = c.views;

  DenoiserGradients g;
  g.params = VecX::Zero(p.theta().size());
  auto gblock = [&](Eigen::Index off, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<MatX>(g.params.data() + off, rows, cols);
  };

  // Head.
  auto w_out = p.block(p.w_out_offset(), s.output_dim(), H);
  std::vector<MatX> dh(views);
  for (int v = 0; v < views; ++v) {
    Eigen::Map<const MatX> dy(grad_out[v].data(), s.output_dim(), T);
    gblock(p.w_out_offset(), s.output_dim(), H).noalias() += dy * c.h_final[v].transpose();
    Eigen::Map<VecX>(g.params.data() + p.b_out_offset(), s.output_dim()) += dy.rowwise().sum();
    dh[v] = w_out.transpose() * dy;
  }

  const bool mix = s.cross_view && views > 1;
  const double scale = 1.0 / std::sqrt(static_cast<double>(H));
  for (int l = s.depth - 1; l >= 0; --l) {
    if (mix) {
      const Eigen::Index off = p.cross_offset(l);
      auto wq = p.block(off, H, H);
      auto wk = p.block(off + H * H, H, H);
      auto wv = p.block(off + 2 * H * H, H, H);
      auto wo = p.block(off + 3 * H * H, H, H);
      auto dwq = gblock(off, H, H);
      auto dwk = gblock(off + H * H, H, H);
      auto dwv = gblock(off + 2 * H * H, H, H);
      auto dwo = gblock(off + 3 * H * H, H, H);
      const auto& frames_cache = c.layers[0][l].cross;
      for (int t = 0; t < T; ++t) {
        const detail::CrossFrameCache& fc = frames_cache[t];
        MatX gout(H, views);
        for (int v = 0; v < views; ++v) {
          gout.col(v) = dh[v].col(t);
        }
        dwo.noalias() += gout * fc.ctx.transpose();
        const MatX dctx = wo.transpose() * gout;
        const MatX dattn = dctx.transpose() * fc.v;  // [v][u] = dctx_v . val_u
        const MatX dval = dctx * fc.attn;            // dval_u = sum_v attn(v,u) dctx_v
        MatX dscores = MatX::Zero(views, views);
        for (int v = 0; v < views; ++v) {
          const double dot = fc.attn.row(v).dot(dattn.row(v));
          for (int u = 0; u < views; ++u) {
            dscores(v, u) = fc.attn(v, u) * (dattn(v, u) - dot);
          }
        }
        dscores *= scale;
        const MatX dq = fc.k * dscores.transpose();  // dq_v = sum_u ds(v,u) k_u
        const MatX dk = fc.q * dscores;              // dk_u = sum_v ds(v,u) q_v
        dwq.noalias() += dq * fc.h_in.transpose();
        dwk.noalias() += dk * fc.h_in.transpose();
        dwv.noalias() += dval * fc.h_in.transpose();
        const MatX dhin = gout + wq.transpose() * dq + wk.transpose() * dk + wv.transpose() * dval;
        for (int v = 0; v < views; ++v) {
          dh[v].col(t) = dhin.col(v);
        }
      }
    }
    const Eigen::Index off = p.conv_offset(l);
    auto w_prev = p.block(off, H, H);
    auto w_mid = p.block(off + H * H, H, H);
    auto w_next = p.block(off + 2 * H * H, H, H);
    for (int v = 0; v < views; ++v) {
      const auto& lc = c.layers[v][l];
      // h_out = h_in + tanh(z)
      const MatX dz = (dh[v].array() * (1.0 - lc.act.array().square())).matrix();
      Eigen::Map<VecX>(g.params.data() + p.conv_bias_offset(l), H) += dz.rowwise().sum();
      gblock(off + H * H, H, H).noalias() += dz * lc.h_in.transpose();
      MatX dhin = dh[v] + w_mid.transpose() * dz;
      if (T > 1) {
        gblock(off, H, H).noalias() += dz.rightCols(T - 1) * lc.h_in.leftCols(T - 1).transpose();
        gblock(off + 2 * H * H, H, H).noalias() +=
            dz.leftCols(T - 1) * lc.h_in.rightCols(T - 1).transpose();
        dhin.leftCols(T - 1).noalias() += w_prev.transpose() * dz.rightCols(T - 1);
        dhin.rightCols(T - 1).noalias() += w_next.transpose() * dz.leftCols(T - 1);
      }
      dh[v] = std::move(dhin);
    }
  }

  auto w_in = p.block(p.w_in_offset(), H, s.input_dim());
  g.inputs.resize(views);
  for (int v = 0; v < views; ++v) {
    const MatX dz = (dh[v].array() * (1.0 - c.view[v].h0.array().square())).matrix();
    gblock(p.w_in_offset(), H, s.input_dim()).noalias() += dz * c.view[v].features.transpose();
    Eigen::Map<VecX>(g.params.data() + p.b_in_offset(), H) += dz.rowwise().sum();
    const MatX df = w_in.transpose() * dz;
    VecX gx(static_cast<Eigen::Index>(T) * 2 * K);
    for (int t = 0; t < T; ++t) {
      gx.segment(static_cast<Eigen::Index>(t) * 2 * K, 2 * K) = df.col(t).head(2 * K);
    }
    g.inputs[v] = std::move(gx);
  }
  return g;
}

inline DenoiserGradients denoiser_backward(const DenoiserParams& p, const DenoiserCache& c,
                                           const VecX& grad_out) {
  return denoiser_backward(p, c, std::vector<VecX>{grad_out});
}

}  // namespace motionlift
