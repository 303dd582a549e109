#pragma once

// Keypoint sequences, root/local decomposition, masking and human-object
// concatenation.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "motionlift/common.hpp"

namespace motionlift {

/// T x K pixel trajectory with a per-entry visibility flag.
///
/// Coordinates are stored frame-major (t * K + k). Dropped keypoints keep
/// their last coordinates; losses and metrics skip them via `visible`.
class KeypointSeq2D {
 public:
  KeypointSeq2D() = default;

  KeypointSeq2D(int frames, int joints)
      : frames_(frames),
        joints_(joints),
        coords_(static_cast<std::size_t>(frames) * joints, Vec2::Zero()),
        visible_(static_cast<std::size_t>(frames) * joints, 1) {
    require(frames >= 1, "KeypointSeq2D: frames must be >= 1");
    require(joints >= 1, "KeypointSeq2D: joints must be >= 1");
  }

  int frames() const { return frames_; }
  int joints() const { return joints_; }
  std::size_t size() const { return coords_.size(); }

  Vec2& at(int t, int k) { return coords_[index(t, k)]; }
  const Vec2& at(int t, int k) const { return coords_[index(t, k)]; }

  bool visible(int t, int k) const { return visible_[index(t, k)] != 0; }
  void set_visible(int t, int k, bool v) { visible_[index(t, k)] = v ? 1 : 0; }

  const std::vector<Vec2>& coords() const { return coords_; }
  std::vector<Vec2>& coords() { return coords_; }
  const std::vector<unsigned char>& visibility() const { return visible_; }
  std::vector<unsigned char>& visibility() { return visible_; }

  /// Throws if any coordinate is non-finite or the shape is below the
  /// pipeline minimum of two joints.
  void validate() const {
    require(frames_ >= 1 && joints_ >= 2, "KeypointSeq2D: need T >= 1 and K >= 2");
    for (const auto& p : coords_) {
      if (!p.allFinite()) {
        throw NumericalError("KeypointSeq2D: non-finite coordinate");
      }
    }
  }

  /// Flattened (x, y) pairs, frame-major.
  VecX flat() const {
    VecX v(2 * static_cast<Eigen::Index>(coords_.size()));
    for (std::size_t i = 0; i < coords_.size(); ++i) {
      v[2 * i] = coords_[i].x();
      v[2 * i + 1] = coords_[i].y();
    }
    return v;
  }

  void set_flat(const VecX& v) {
    require(v.size() == 2 * static_cast<Eigen::Index>(coords_.size()),
            "KeypointSeq2D::set_flat: size mismatch");
    for (std::size_t i = 0; i < coords_.size(); ++i) {
      coords_[i] = Vec2(v[2 * i], v[2 * i + 1]);
    }
  }

  bool operator==(const KeypointSeq2D& o) const {
    return frames_ == o.frames_ && joints_ == o.joints_ && coords_ == o.coords_ &&
           visible_ == o.visible_;
  }

 private:
  std::size_t index(int t, int k) const {
    return static_cast<std::size_t>(t) * joints_ + k;
  }

  int frames_ = 0;
  int joints_ = 0;
  std::vector<Vec2> coords_;
  std::vector<unsigned char> visible_;
};

/// Joint-layout conventions. `pelvis` is empty for layouts without a pelvis
/// joint; the hip midpoint stands in for it.
struct SkeletonSpec {
  std::vector<std::string> joint_names;
  int left_hip = 0;
  int right_hip = 1;
  std::optional<int> pelvis;
  std::vector<int> foot_joints;

  int joints() const { return static_cast<int>(joint_names.size()); }

  void validate(int K) const {
    if (joints() != K) {
      throw std::invalid_argument("SkeletonSpec: joint count " + std::to_string(joints()) +
                                  " does not match sequence K=" + std::to_string(K));
    }
    auto in_range = [K](int i) { return i >= 0 && i < K; };
    require(in_range(left_hip) && in_range(right_hip), "SkeletonSpec: hip index out of range");
    require(left_hip != right_hip, "SkeletonSpec: left_hip == right_hip");
    if (pelvis) {
      require(in_range(*pelvis), "SkeletonSpec: pelvis index out of range");
    }
    for (int f : foot_joints) {
      require(in_range(f), "SkeletonSpec: foot index out of range");
    }
  }

  bool is_hip(int k) const { return k == left_hip || k == right_hip; }

  /// 17-joint COCO layout (no pelvis joint).
  static SkeletonSpec coco17() {
    SkeletonSpec s;
    s.joint_names = {"nose",       "left_eye",    "right_eye",      "left_ear",  "right_ear",
                     "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
                     "left_wrist", "right_wrist", "left_hip",       "right_hip", "left_knee",
                     "right_knee", "left_ankle",  "right_ankle"};
    s.left_hip = 11;
    s.right_hip = 12;
    s.foot_joints = {15, 16};
    return s;
  }

  /// Minimal layout for tests: hips at 0 and 1, generic names for the rest.
  static SkeletonSpec generic(int K, int left_hip = 0, int right_hip = 1) {
    SkeletonSpec s;
    for (int k = 0; k < K; ++k) {
      s.joint_names.push_back("j" + std::to_string(k));
    }
    s.left_hip = left_hip;
    s.right_hip = right_hip;
    return s;
  }

  /// Same layout extended with `M` trailing object keypoints.
  SkeletonSpec with_object(int M) const {
    SkeletonSpec s = *this;
    for (int m = 0; m < M; ++m) {
      s.joint_names.push_back("obj" + std::to_string(m));
    }
    return s;
  }
};

struct MotionDecomposition {
  int frames = 0;
  std::vector<Vec2> root;   // T x 2: left hip, right hip
  std::vector<Vec2> local;  // T x (K-2), centered on the canvas

  int local_joints() const { return frames ? static_cast<int>(local.size()) / frames : 0; }
};

struct ObjectKeypointSeq {
  int frames = 0;
  int keypoints = 0;
  std::vector<Vec2> coords;                      // T x M
  std::vector<unsigned char> static_visibility;  // M
  std::vector<unsigned char> frame_visibility;   // T x M

  ObjectKeypointSeq() = default;
  ObjectKeypointSeq(int T, int M)
      : frames(T),
        keypoints(M),
        coords(static_cast<std::size_t>(T) * M, Vec2::Zero()),
        static_visibility(M, 1),
        frame_visibility(static_cast<std::size_t>(T) * M, 1) {}

  Vec2& at(int t, int m) { return coords[static_cast<std::size_t>(t) * keypoints + m]; }
  const Vec2& at(int t, int m) const {
    return coords[static_cast<std::size_t>(t) * keypoints + m];
  }

  void validate() const {
    require(coords.size() == static_cast<std::size_t>(frames) * keypoints &&
                static_visibility.size() == static_cast<std::size_t>(keypoints) &&
                frame_visibility.size() == coords.size(),
            "ObjectKeypointSeq: inconsistent sizes");
    for (int t = 0; t < frames; ++t) {
      for (int m = 0; m < keypoints; ++m) {
        if (frame_visibility[static_cast<std::size_t>(t) * keypoints + m] &&
            !static_visibility[m]) {
          throw std::invalid_argument(
              "ObjectKeypointSeq: frame visibility set for a statically hidden keypoint");
        }
      }
    }
  }
};

/// T x J world-space points in meters.
struct Seq3D {
  int frames = 0;
  int joints = 0;
  std::vector<Vec3> coords;

  Seq3D() = default;
  Seq3D(int T, int J)
      : frames(T), joints(J), coords(static_cast<std::size_t>(T) * J, Vec3::Zero()) {}

  Vec3& at(int t, int j) { return coords[static_cast<std::size_t>(t) * joints + j]; }
  const Vec3& at(int t, int j) const {
    return coords[static_cast<std::size_t>(t) * joints + j];
  }

  std::vector<Vec3> frame(int t) const {
    auto first = coords.begin() + static_cast<std::ptrdiff_t>(t) * joints;
    return {first, first + joints};
  }

  void validate() const {
    require(coords.size() == static_cast<std::size_t>(frames) * joints,
            "Seq3D: inconsistent sizes");
    for (const auto& p : coords) {
      if (!p.allFinite()) {
        throw NumericalError("Seq3D: non-finite coordinate");
      }
    }
  }

  bool operator==(const Seq3D& o) const {
    return frames == o.frames && joints == o.joints && coords == o.coords;
  }
};

// ---------------------------------------------------------------------------
// Root / local decomposition

inline Vec2 hip_mean(const KeypointSeq2D& seq, const SkeletonSpec& skel, int t) {
  return 0.5 * (seq.at(t, skel.left_hip) + seq.at(t, skel.right_hip));
}

/// Splits a sequence into the two hip tracks and a local pose whose hip
/// midpoint sits at `center` in every frame.
inline MotionDecomposition decompose(const KeypointSeq2D& seq, const SkeletonSpec& skel,
                                     const Vec2& center) {
  skel.validate(seq.joints());
  const int T = seq.frames();
  const int K = seq.joints();
  MotionDecomposition dec;
  dec.frames = T;
  dec.root.reserve(2 * static_cast<std::size_t>(T));
  dec.local.reserve(static_cast<std::size_t>(T) * (K - 2));
  for (int t = 0; t < T; ++t) {
    const Vec2 offset = hip_mean(seq, skel, t) - center;
    dec.root.push_back(seq.at(t, skel.left_hip));
    dec.root.push_back(seq.at(t, skel.right_hip));
    for (int k = 0; k < K; ++k) {
      if (!skel.is_hip(k)) {
        dec.local.push_back(seq.at(t, k) - offset);
      }
    }
  }
  return dec;
}

/// Inverse of decompose(). Visibility is all-true; callers carry it over.
inline KeypointSeq2D recompose(const MotionDecomposition& dec, const SkeletonSpec& skel,
                               const Vec2& center) {
  const int T = dec.frames;
  const int K = skel.joints();
  skel.validate(K);
  if (T < 1 || dec.root.size() != 2 * static_cast<std::size_t>(T) ||
      dec.local.size() != static_cast<std::size_t>(T) * (K - 2)) {
    throw std::invalid_argument("recompose: decomposition does not match skeleton");
  }
  KeypointSeq2D out(T, K);
  for (int t = 0; t < T; ++t) {
    const Vec2 left = dec.root[2 * t];
    const Vec2 right = dec.root[2 * t + 1];
    const Vec2 offset = 0.5 * (left + right) - center;
    out.at(t, skel.left_hip) = left;
    out.at(t, skel.right_hip) = right;
    int l = 0;
    for (int k = 0; k < K; ++k) {
      if (!skel.is_hip(k)) {
        out.at(t, k) = dec.local[static_cast<std::size_t>(t) * (K - 2) + l++] + offset;
      }
    }
  }
  return out;
}

// The denoiser sees the decomposition packed back into a K-joint array: hip
// slots carry the global hip tracks, every other slot the centered local pose.

inline KeypointSeq2D to_decomposed_layout(const KeypointSeq2D& seq, const SkeletonSpec& skel,
                                          const Vec2& center) {
  skel.validate(seq.joints());
  KeypointSeq2D out = seq;
  for (int t = 0; t < seq.frames(); ++t) {
    const Vec2 offset = hip_mean(seq, skel, t) - center;
    for (int k = 0; k < seq.joints(); ++k) {
      if (!skel.is_hip(k)) {
        out.at(t, k) -= offset;
      }
    }
  }
  return out;
}

inline KeypointSeq2D from_decomposed_layout(const KeypointSeq2D& packed,
                                            const SkeletonSpec& skel, const Vec2& center) {
  skel.validate(packed.joints());
  KeypointSeq2D out = packed;
  for (int t = 0; t < packed.frames(); ++t) {
    const Vec2 offset = hip_mean(packed, skel, t) - center;
    for (int k = 0; k < packed.joints(); ++k) {
      if (!skel.is_hip(k)) {
        out.at(t, k) += offset;
      }
    }
  }
  return out;
}

/// Pulls a gradient w.r.t. the global sequence back onto the packed layout.
inline std::vector<Vec2> global_grad_to_decomposed(const std::vector<Vec2>& grad_global,
                                                   const SkeletonSpec& skel, int T) {
  const int K = skel.joints();
  require(grad_global.size() == static_cast<std::size_t>(T) * K,
          "global_grad_to_decomposed: size mismatch");
  std::vector<Vec2> out = grad_global;
  for (int t = 0; t < T; ++t) {
    Vec2 local_sum = Vec2::Zero();
    for (int k = 0; k < K; ++k) {
      if (!skel.is_hip(k)) {
        local_sum += grad_global[static_cast<std::size_t>(t) * K + k];
      }
    }
    out[static_cast<std::size_t>(t) * K + skel.left_hip] += 0.5 * local_sum;
    out[static_cast<std::size_t>(t) * K + skel.right_hip] += 0.5 * local_sum;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Masks

inline std::vector<unsigned char> hip_exclusion_mask(const SkeletonSpec& skel, int K) {
  skel.validate(K);
  std::vector<unsigned char> mask(K, 1);
  mask[skel.left_hip] = 0;
  mask[skel.right_hip] = 0;
  return mask;
}

/// Drops each currently visible entry with probability `drop_rate`.
inline std::vector<unsigned char> random_drop_mask(const std::vector<unsigned char>& visibility,
                                                   double drop_rate, Rng& rng) {
  if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) {
    throw std::invalid_argument("random_drop_mask: drop_rate must lie in [0, 1]");
  }
  std::vector<unsigned char> out = visibility;
  for (auto& v : out) {
    // Draw for every entry so the stream position does not depend on the mask.
    const double u = uniform01(rng);
    if (v && u < drop_rate) {
      v = 0;
    }
  }
  return out;
}

inline std::vector<unsigned char> random_drop_mask(const std::vector<unsigned char>& visibility,
                                                   double drop_rate, std::uint64_t seed) {
  Rng rng(seed);
  return random_drop_mask(visibility, drop_rate, rng);
}

// ---------------------------------------------------------------------------
// Human-object concatenation

inline KeypointSeq2D concat_human_object(const KeypointSeq2D& human,
                                         const ObjectKeypointSeq& object) {
  if (object.keypoints == 0) {
    return human;
  }
  if (human.frames() != object.frames) {
    throw std::invalid_argument("concat_human_object: frame-count mismatch");
  }
  object.validate();
  const int K = human.joints();
  const int M = object.keypoints;
  KeypointSeq2D out(human.frames(), K + M);
  for (int t = 0; t < human.frames(); ++t) {
    for (int k = 0; k < K; ++k) {
      out.at(t, k) = human.at(t, k);
      out.set_visible(t, k, human.visible(t, k));
    }
    for (int m = 0; m < M; ++m) {
      out.at(t, K + m) = object.at(t, m);
      out.set_visible(t, K + m,
                      object.frame_visibility[static_cast<std::size_t>(t) * M + m] != 0);
    }
  }
  return out;
}

struct HumanObjectSplit {
  KeypointSeq2D human;
  ObjectKeypointSeq object;
};

/// Inverse of concat_human_object(); static visibility is the per-keypoint
/// union of frame visibility.
inline HumanObjectSplit split_human_object(const KeypointSeq2D& joint, int human_joints) {
  require(human_joints >= 1 && human_joints <= joint.joints(),
          "split_human_object: human joint count out of range");
  const int T = joint.frames();
  const int M = joint.joints() - human_joints;
  HumanObjectSplit s{KeypointSeq2D(T, human_joints), ObjectKeypointSeq(T, M)};
  std::fill(s.object.static_visibility.begin(), s.object.static_visibility.end(), 0);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < human_joints; ++k) {
      s.human.at(t, k) = joint.at(t, k);
      s.human.set_visible(t, k, joint.visible(t, k));
    }
    for (int m = 0; m < M; ++m) {
      s.object.at(t, m) = joint.at(t, human_joints + m);
      const bool vis = joint.visible(t, human_joints + m);
      s.object.frame_visibility[static_cast<std::size_t>(t) * M + m] = vis ? 1 : 0;
      if (vis) {
        s.object.static_visibility[m] = 1;
      }
    }
  }
  return s;
}

/// Splits a 3D sequence at joint index `first_joints`.
inline std::pair<Seq3D, Seq3D> split_seq3d(const Seq3D& seq, int first_joints) {
  require(first_joints >= 0 && first_joints <= seq.joints, "split_seq3d: index out of range");
  Seq3D a(seq.frames, first_joints);
  Seq3D b(seq.frames, seq.joints - first_joints);
  for (int t = 0; t < seq.frames; ++t) {
    for (int j = 0; j < seq.joints; ++j) {
      if (j < first_joints) {
        a.at(t, j) = seq.at(t, j);
      } else {
        b.at(t, j - first_joints) = seq.at(t, j);
      }
    }
  }
  return {a, b};
}

}  // namespace motionlift
