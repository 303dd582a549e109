#pragma once

// Symmetric 2D Chamfer distance and mask-based object pose alignment.

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "motionlift/camera.hpp"
#include "motionlift/mesh.hpp"
#include "motionlift/optim.hpp"

namespace motionlift {

/// Uniform bucket grid for exact nearest-neighbour queries in 2D.
class PointGrid {
 public:
  explicit PointGrid(const std::vector<Vec2>& points, double per_cell = 2.0) : pts_(points) {
    require(!pts_.empty(), "PointGrid: empty point set");
    lo_ = hi_ = pts_.front();
    for (const auto& p : pts_) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    const Vec2 span = (hi_ - lo_).cwiseMax(1e-9);
    cell_ = std::sqrt(span.x() * span.y() * per_cell / pts_.size());
    cell_ = std::max({cell_, span.maxCoeff() / 1024.0, 1e-9});
    nx_ = std::clamp(static_cast<int>(span.x() / cell_) + 1, 1, 1024);
    ny_ = std::clamp(static_cast<int>(span.y() / cell_) + 1, 1, 1024);
    std::vector<int> count(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    std::vector<int> cell_of(pts_.size());
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      cell_of[i] = index(cx(pts_[i].x()), cy(pts_[i].y()));
      ++count[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < count.size(); ++c) count[c] += count[c - 1];
    start_ = count;
    order_.resize(pts_.size());
    for (std::size_t i = 0; i < pts_.size(); ++i) order_[count[cell_of[i]]++] = static_cast<int>(i);
  }

  /// Index and squared distance of the nearest point to `q`.
  std::pair<int, double> nearest(const Vec2& q) const {
    const int qx = cx(q.x());
    const int qy = cy(q.y());
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    const int max_ring = std::max(nx_, ny_);
    for (int r = 0; r <= max_ring; ++r) {
      for (int y = qy - r; y <= qy + r; ++y) {
        if (y < 0 || y >= ny_) continue;
        const bool edge_row = y == qy - r || y == qy + r;
        for (int x = qx - r; x <= qx + r; x += (edge_row || r == 0) ? 1 : 2 * r) {
          if (x < 0 || x >= nx_) continue;
          const int c = index(x, y);
          for (int k = start_[c]; k < start_[c + 1]; ++k) {
            const Vec2& p = pts_[order_[k]];
            const double dx = q.x() - p.x();
            const double dy = q.y() - p.y();
            const double d = dx * dx + dy * dy;
            if (d < best_d) {
              best_d = d;
              best = order_[k];
            }
          }
        }
      }
      // Anything outside the (2r+1)^2 block is at least this far away.
      const double gap = std::min({q.x() - (lo_.x() + (qx - r) * cell_),
                                   lo_.x() + (qx + r + 1) * cell_ - q.x(),
                                   q.y() - (lo_.y() + (qy - r) * cell_),
                                   lo_.y() + (qy + r + 1) * cell_ - q.y()});
      if (best >= 0 && gap > 0.0 && gap * gap >= best_d) break;
    }
    return {best, best_d};
  }

  const std::vector<Vec2>& points() const { return pts_; }

 private:
  int cx(double x) const { return std::clamp(static_cast<int>((x - lo_.x()) / cell_), 0, nx_ - 1); }
  int cy(double y) const { return std::clamp(static_cast<int>((y - lo_.y()) / cell_), 0, ny_ - 1); }
  int index(int x, int y) const { return y * nx_ + x; }

  std::vector<Vec2> pts_;
  Vec2 lo_, hi_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<int> start_;
  std::vector<int> order_;
};

namespace detail {

inline double chamfer_one_side(const std::vector<Vec2>& from, const PointGrid& to) {
  double sum = 0.0;
  for (const auto& p : from) sum += to.nearest(p).second;
  return sum / static_cast<double>(from.size());
}

}  // namespace detail

/// Mean squared nearest-neighbour distance from A to B plus from B to A.
inline double chamfer_2d(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  require(!a.empty() && !b.empty(), "chamfer_2d: both point sets must be nonempty");
  return detail::chamfer_one_side(a, PointGrid(b)) + detail::chamfer_one_side(b, PointGrid(a));
}

struct ChamferAlignConfig {
  int samples = 5000;           // mask pixels and mesh surface points
  int restarts = 200;
  int restart_samples = 1000;   // subsample used while screening restarts
  int restart_iterations = 60;
  int refine_candidates = 4;    // best restarts refined on the full sample
  int refine_iterations = 300;
  double lr_rotation = 0.05;    // radians
  double lr_translation = 0.02; // fraction of the initial depth
  bool stratified = false;      // jittered-grid sampling instead of i.i.d. draws
  bool visible_surface = true;  // per-pose samples on front faces, by projected area (convex meshes)
};

struct ChamferAlignResult {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double loss = std::numeric_limits<double>::infinity();  // px^2
  int restarts_run = 0;
};

/// Uniform random rotation (quaternion sampling).
inline Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(standard_normal(rng), standard_normal(rng), standard_normal(rng),
                       standard_normal(rng));
  q.normalize();
  return q.toRotationMatrix();
}

namespace detail {

struct PoseLoss {
  double loss = std::numeric_limits<double>::infinity();
  Vec3 grad_rot = Vec3::Zero();  // left-perturbation tangent
  Vec3 grad_t = Vec3::Zero();
};

/// Chamfer between the mask samples and the projected surface samples, with
/// the gradient for the pose. Returns an infinite loss if any sample falls
/// behind the camera.
inline PoseLoss chamfer_pose_loss(const std::vector<Vec3>& surface, const Mat3& r, const Vec3& t,
                                  const CameraIntrinsics& intr, const std::vector<Vec2>& mask_pts,
                                  const PointGrid& mask_grid) {
  PoseLoss out;
  const std::size_t n = surface.size();
  if (n == 0) return out;
  std::vector<Vec3> cam(n);
  std::vector<Vec2> px(n);
  for (std::size_t i = 0; i < n; ++i) {
    cam[i] = r * surface[i] + t;
    const Projection p = project_camera_point(cam[i], intr, 1e-3);
    if (!p.valid) return out;
    px[i] = p.pixel;
  }
  const PointGrid proj_grid(px);
  std::vector<Vec2> g(n, Vec2::Zero());
  double a_side = 0.0;
  const double inv_a = 1.0 / static_cast<double>(mask_pts.size());
  for (const auto& m : mask_pts) {
    const auto [j, d] = proj_grid.nearest(m);
    a_side += d;
    g[j] += 2.0 * inv_a * (px[j] - m);
  }
  double b_side = 0.0;
  const double inv_b = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [j, d] = mask_grid.nearest(px[i]);
    b_side += d;
    g[i] += 2.0 * inv_b * (px[i] - mask_pts[j]);
  }
  out.loss = a_side * inv_a + b_side * inv_b;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& c = cam[i];
    const double iz = 1.0 / c.z();
    const Vec3 g_cam(intr.fx * iz * g[i].x(), intr.fy * iz * g[i].y(),
                     -(intr.fx * c.x() * g[i].x() + intr.fy * c.y() * g[i].y()) * iz * iz);
    out.grad_t += g_cam;
    out.grad_rot += (c - t).cross(g_cam);
  }
  return out;
}

/// Fixed per-face sample pools for visible-surface sampling. Normals point
/// away from the mesh centroid, which is correct for convex meshes.
struct SurfacePool {
  std::vector<std::vector<Vec3>> points;  // [face][k], uniform in the face
  std::vector<Vec3> normal, center;
  std::vector<double> area;
  int count = 0;

  SurfacePool(const TriMesh& mesh, int n, Rng& rng) : count(n) {
    const Vec3 mid = mesh.centroid();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
      const Vec3& a = mesh.vertices[mesh.faces[f][0]];
      const Vec3& b = mesh.vertices[mesh.faces[f][1]];
      const Vec3& c = mesh.vertices[mesh.faces[f][2]];
      const Vec3 ctr = (a + b + c) / 3.0;
      Vec3 nrm = (b - a).cross(c - a);
      if (nrm.dot(ctr - mid) < 0.0) nrm = -nrm;
      normal.push_back(nrm.norm() > 0.0 ? nrm.normalized() : Vec3::Zero());
      center.push_back(ctr);
      area.push_back(mesh.face_area(f));
      std::vector<Vec3> pts;
      pts.reserve(n);
      for (int k = 0; k < n; ++k) {
        const double r1 = std::sqrt(uniform01(rng)), r2 = uniform01(rng);
        pts.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
      }
      points.push_back(std::move(pts));
    }
  }

  /// `count` points spread over the faces facing the camera, in proportion
  /// to each face's projected area (largest-remainder allocation).
  std::vector<Vec3> visible(const Mat3& r, const Vec3& t) const {
    std::vector<double> w(area.size(), 0.0);
    double total = 0.0;
    for (std::size_t f = 0; f < area.size(); ++f) {
      const Vec3 c = r * center[f] + t;
      const double cos = -(r * normal[f]).dot(c) / c.norm();
      if (cos > 0.0 && c.z() > 0.0) w[f] = area[f] * cos / c.squaredNorm();
      total += w[f];
    }
    std::vector<Vec3> out;
    if (total <= 0.0) return out;
    std::vector<int> take(w.size());
    std::vector<std::pair<double, std::size_t>> rem;
    int used = 0;
    for (std::size_t f = 0; f < w.size(); ++f) {
      const double exact = count * w[f] / total;
      take[f] = static_cast<int>(std::floor(exact));
      used += take[f];
      rem.emplace_back(exact - take[f], f);
    }
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (int k = 0; used < count; ++k, ++used) ++take[rem[k].second];
    out.reserve(count);
    for (std::size_t f = 0; f < w.size(); ++f) {
      out.insert(out.end(), points[f].begin(), points[f].begin() + take[f]);
    }
    return out;
  }
};

/// Adam in the tangent space: rotation is updated by left multiplication.
inline std::pair<Mat3, Vec3> descend_pose(const std::vector<Vec3>& surface, Mat3 r, Vec3 t,
                                          const CameraIntrinsics& intr,
                                          const std::vector<Vec2>& mask_pts,
                                          const PointGrid& mask_grid, int iterations,
                                          double lr_rot, double lr_t, double* final_loss,
                                          const SurfacePool* pool = nullptr) {
  AdamState adam = AdamState::zeros(6);
  Mat3 best_r = r;
  Vec3 best_t = t;
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= iterations; ++it) {
    const PoseLoss l = pool ? chamfer_pose_loss(pool->visible(r, t), r, t, intr, mask_pts, mask_grid)
                            : chamfer_pose_loss(surface, r, t, intr, mask_pts, mask_grid);
    if (!std::isfinite(l.loss)) break;
    if (l.loss < best) {
      best = l.loss;
      best_r = r;
      best_t = t;
    }
    if (it == iterations) break;
    VecX g(6);
    g << l.grad_rot, l.grad_t;
    VecX step = VecX::Zero(6);
    const double decay = cosine_lr(1.0, it, iterations, 0.01);
    adam_step(step, g, adam, {decay});
    const Vec3 w = lr_rot * step.head<3>();
    if (w.norm() > 0.0) r = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix() * r;
    t += lr_t * step.tail<3>();
  }
  if (final_loss) *final_loss = best;
  return {best_r, best_t};
}

/// `n` random mask pixels, at most one per lattice cell of area count/n,
/// topped up with uniform draws when cells run short.
inline std::vector<Vec2> stratified_pixels(const std::vector<Vec2>& pts, int n, Rng& rng) {
  if (static_cast<int>(pts.size()) <= n) return pts;
  const double stride = std::sqrt(static_cast<double>(pts.size()) / n);
  std::map<std::pair<long, long>, std::vector<int>> cells;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    cells[{static_cast<long>(std::floor(pts[i].x() / stride)),
           static_cast<long>(std::floor(pts[i].y() / stride))}]
        .push_back(static_cast<int>(i));
  }
  std::vector<int> pick;
  for (const auto& [key, members] : cells) {
    pick.push_back(members[uniform_int(rng, 0, static_cast<int>(members.size()) - 1)]);
  }
  std::shuffle(pick.begin(), pick.end(), rng);
  if (static_cast<int>(pick.size()) > n) pick.resize(n);
  std::vector<unsigned char> used(pts.size(), 0);
  for (int i : pick) used[i] = 1;
  while (static_cast<int>(pick.size()) < n) {
    const int i = uniform_int(rng, 0, static_cast<int>(pts.size()) - 1);
    if (!used[i]) {
      used[i] = 1;
      pick.push_back(i);
    }
  }
  std::vector<Vec2> out;
  for (int i : pick) out.push_back(pts[i]);
  return out;
}

template <typename P>
std::vector<P> subsample(const std::vector<P>& pts, int n, Rng& rng) {
  if (static_cast<int>(pts.size()) <= n) return pts;
  std::vector<P> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(pts[uniform_int(rng, 0, static_cast<int>(pts.size()) - 1)]);
  return out;
}

}  // namespace detail

/// Translation placing the mesh centroid on the back-projected mask box
/// center, at the depth where the mesh extent matches the box diagonal.
inline Vec3 translation_from_mask(const TriMesh& mesh, const Mat3& rotation, const MaskImage& mask,
                                  const CameraIntrinsics& intr) {
  const auto fg = mask.foreground();
  require(!fg.empty(), "translation_from_mask: empty mask");
  Vec2 lo = fg.front(), hi = fg.front();
  for (const auto& p : fg) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec2 c = 0.5 * (lo + hi);
  const double diag = std::max((hi - lo).norm(), 1.0);
  const double z = 0.5 * (intr.fx + intr.fy) * mesh.extent() / diag;
  const Vec3 ray((c.x() - intr.cx) / intr.fx, (c.y() - intr.cy) / intr.fy, 1.0);
  return z * ray - rotation * mesh.centroid();
}

/// Fits the camera-frame pose of `mesh` to the silhouette `mask`. With
/// `init`, refines from it only; otherwise screens random restarts and
/// refines the best few on the full sample.
inline ChamferAlignResult chamfer_align_frame(const TriMesh& mesh, const MaskImage& mask,
                                              const CameraIntrinsics& intr,
                                              const std::optional<std::pair<Mat3, Vec3>>& init,
                                              Rng& rng, const ChamferAlignConfig& cfg = {}) {
  mesh.validate();
  mask.validate();
  const auto fg = mask.foreground();
  if (fg.empty()) throw GeometryError("chamfer_align_frame: mask has no foreground");
  require(cfg.samples > 0 && cfg.restarts >= 1, "chamfer_align_frame: invalid config");

  std::vector<Vec2> mask_pts;
  if (cfg.stratified) {
    mask_pts = detail::stratified_pixels(fg, cfg.samples, rng);
  } else if (static_cast<int>(fg.size()) <= cfg.samples) {
    mask_pts = fg;
  } else {
    std::vector<int> idx(fg.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i = 0; i < cfg.samples; ++i) mask_pts.push_back(fg[idx[i]]);
  }
  const std::vector<Vec3> surface = cfg.stratified
                                        ? sample_surface_stratified(mesh, cfg.samples, rng)
                                        : sample_surface(mesh, cfg.samples, rng);
  const PointGrid mask_grid(mask_pts);
  std::optional<detail::SurfacePool> pool, sub_pool;
  if (cfg.visible_surface) {
    pool.emplace(mesh, cfg.samples, rng);
    sub_pool.emplace(mesh, std::min(cfg.samples, cfg.restart_samples), rng);
  }

  ChamferAlignResult res;
  auto refine = [&](const Mat3& r0, const Vec3& t0) {
    double loss = 0.0;
    const double lr_t = cfg.lr_translation * std::max(t0.z(), 1e-3);
    auto [r, t] = detail::descend_pose(surface, r0, t0, intr, mask_pts, mask_grid,
                                       cfg.refine_iterations, cfg.lr_rotation, lr_t, &loss,
                                       pool ? &*pool : nullptr);
    if (loss < res.loss) {
      res.loss = loss;
      res.rotation = r;
      res.translation = t;
    }
  };

  if (init) {
    refine(init->first, init->second);
  } else {
    const std::vector<Vec2> sub_mask = detail::subsample(mask_pts, cfg.restart_samples, rng);
    const PointGrid sub_grid(sub_mask);
    const std::vector<Vec3> sub_surface = detail::subsample(surface, cfg.restart_samples, rng);
    std::vector<std::tuple<double, Mat3, Vec3>> screened;
    for (int k = 0; k < cfg.restarts; ++k) {
      const Mat3 r0 = random_rotation(rng);
      const Vec3 t0 = translation_from_mask(mesh, r0, mask, intr);
      double loss = 0.0;
      const double lr_t = cfg.lr_translation * std::max(t0.z(), 1e-3);
      auto [r, t] = detail::descend_pose(sub_surface, r0, t0, intr, sub_mask, sub_grid,
                                         cfg.restart_iterations, cfg.lr_rotation, lr_t, &loss,
                                         sub_pool ? &*sub_pool : nullptr);
      if (std::isfinite(loss)) screened.emplace_back(loss, r, t);
      ++res.restarts_run;
    }
    if (screened.empty()) throw GeometryError("chamfer_align_frame: every restart diverged");
    std::sort(screened.begin(), screened.end(),
              [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
    const int keep = std::min<int>(cfg.refine_candidates, static_cast<int>(screened.size()));
    for (int k = 0; k < keep; ++k) refine(std::get<1>(screened[k]), std::get<2>(screened[k]));
  }
  if (!std::isfinite(res.loss)) throw GeometryError("chamfer_align_frame: optimization diverged");
  return res;
}

}  // namespace motionlift
