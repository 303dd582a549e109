#pragma once

// Continuous 6D rotation parameterization. Templated on the scalar so the
// object fit can differentiate through it with dual numbers.

#include <array>
#include <cmath>

#include <Eigen/Core>

#include "motionlift/common.hpp"

namespace motionlift {

using Rot6d = Eigen::Matrix<double, 6, 1>;

/// Gram-Schmidt on the two 3-vectors (r0..r2), (r3..r5). Columns are
/// [b1 b2 b1 x b2]. No degeneracy checks; see rot6d_to_matrix().
template <typename T>
Eigen::Matrix<T, 3, 3> rot6d_to_matrix_unchecked(const T* r) {
  using std::sqrt;
  using V3 = Eigen::Matrix<T, 3, 1>;
  const V3 a1(r[0], r[1], r[2]);
  const V3 a2(r[3], r[4], r[5]);
  const V3 b1 = a1 / sqrt(a1.squaredNorm());
  const V3 u2 = a2 - b1.dot(a2) * b1;
  const V3 b2 = u2 / sqrt(u2.squaredNorm());
  Eigen::Matrix<T, 3, 3> m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b1.cross(b2);
  return m;
}

/// Throws GeometryError when the first vector vanishes or the two are
/// (nearly) parallel.
inline Mat3 rot6d_to_matrix(const Rot6d& r, double eps = 1e-9) {
  const Vec3 a1 = r.head<3>();
  const Vec3 a2 = r.tail<3>();
  if (!r.allFinite() || a1.norm() < eps) {
    throw GeometryError("rot6d_to_matrix: first column is degenerate");
  }
  if (a1.normalized().cross(a2).norm() < eps * std::max(1.0, a2.norm())) {
    throw GeometryError("rot6d_to_matrix: columns are parallel");
  }
  return rot6d_to_matrix_unchecked(r.data());
}

/// First two columns of a rotation matrix.
inline Rot6d matrix_to_rot6d(const Mat3& m) {
  Rot6d r;
  r << m.col(0), m.col(1);
  return r;
}

}  // namespace motionlift
