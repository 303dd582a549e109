#pragma once

// Triangle meshes, binary masks, surface sampling and silhouette rendering.
// OBJ (v/f subset) and ASCII PGM (P2) readers and writers.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "motionlift/camera.hpp"
#include "motionlift/common.hpp"

namespace motionlift {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  double face_area(std::size_t f) const {
    const auto& i = faces[f];
    return 0.5 * (vertices[i[1]] - vertices[i[0]]).cross(vertices[i[2]] - vertices[i[0]]).norm();
  }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& v : vertices) c += v;
    return c / static_cast<double>(vertices.size());
  }

  /// Diagonal of the axis-aligned bounding box.
  double extent() const {
    Vec3 lo = vertices.front(), hi = vertices.front();
    for (const auto& v : vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    return (hi - lo).norm();
  }

  void validate() const {
    require(!vertices.empty() && !faces.empty(), "TriMesh: empty mesh");
    const int n = static_cast<int>(vertices.size());
    for (const auto& f : faces) {
      for (int i : f) {
        if (i < 0 || i >= n) throw SchemaError("TriMesh: face index out of range");
      }
    }
  }
};

/// Axis-aligned box centered at the origin, 12 triangles, outward winding.
inline TriMesh box_mesh(const Vec3& size) {
  TriMesh m;
  const Vec3 h = 0.5 * size;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back(i & 1 ? h.x() : -h.x(), i & 2 ? h.y() : -h.y(), i & 4 ? h.z() : -h.z());
  }
  m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

/// Area-weighted uniform samples on the surface. Zero-area faces are never
/// chosen.
inline std::vector<Vec3> sample_surface(const TriMesh& mesh, int count, Rng& rng) {
  mesh.validate();
  require(count > 0, "sample_surface: count must be positive");
  std::vector<double> cdf;
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cdf.push_back(total);
  }
  if (!(total > 0.0)) {
    throw GeometryError("sample_surface: mesh has no area");
  }
  std::vector<Vec3> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double u = uniform01(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t f = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
    while (mesh.face_area(f) == 0.0) f = (f + 1) % cdf.size();
    double a = uniform01(rng), b = uniform01(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    const auto& idx = mesh.faces[f];
    const Vec3& p0 = mesh.vertices[idx[0]];
    out.push_back(p0 + a * (mesh.vertices[idx[1]] - p0) + b * (mesh.vertices[idx[2]] - p0));
  }
  return out;
}

/// Stratified variant: each face receives a share of `count` proportional
/// to its area (largest remainder), and its points come from a jittered grid
/// mapped area-uniformly onto the triangle.
inline std::vector<Vec3> sample_surface_stratified(const TriMesh& mesh, int count, Rng& rng) {
  mesh.validate();
  require(count > 0, "sample_surface: count must be positive");
  const std::size_t F = mesh.faces.size();
  std::vector<double> area(F);
  double total = 0.0;
  for (std::size_t f = 0; f < F; ++f) total += area[f] = mesh.face_area(f);
  if (!(total > 0.0)) {
    throw GeometryError("sample_surface: mesh has no area");
  }
  std::vector<int> n(F);
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t f = 0; f < F; ++f) {
    const double exact = count * area[f] / total;
    n[f] = static_cast<int>(exact);
    assigned += n[f];
    rem.emplace_back(exact - n[f], f);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; assigned < count; ++i, ++assigned) ++n[rem[i].second];

  std::vector<Vec3> out;
  out.reserve(count);
  for (std::size_t f = 0; f < F; ++f) {
    if (n[f] == 0) continue;
    const int m = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n[f]))));
    std::vector<int> cells(static_cast<std::size_t>(m) * m);
    std::iota(cells.begin(), cells.end(), 0);
    std::shuffle(cells.begin(), cells.end(), rng);
    const auto& idx = mesh.faces[f];
    const Vec3& p0 = mesh.vertices[idx[0]];
    const Vec3& p1 = mesh.vertices[idx[1]];
    const Vec3& p2 = mesh.vertices[idx[2]];
    for (int k = 0; k < n[f]; ++k) {
      const double u1 = (cells[k] % m + uniform01(rng)) / m;
      const double u2 = (cells[k] / m + uniform01(rng)) / m;
      const double r = std::sqrt(u1);
      out.push_back((1.0 - r) * p0 + r * (1.0 - u2) * p1 + r * u2 * p2);
    }
  }
  return out;
}

struct MaskImage {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> data;  // row-major, 1 = foreground

  MaskImage() = default;
  MaskImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

  unsigned char& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  unsigned char at(int row, int col) const {
    return data[static_cast<std::size_t>(row) * width + col];
  }

  int count() const {
    int n = 0;
    for (auto v : data) n += v ? 1 : 0;
    return n;
  }

  /// Pixel centers (col + 0.5, row + 0.5) of foreground pixels.
  std::vector<Vec2> foreground() const {
    std::vector<Vec2> out;
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        if (at(r, c)) out.emplace_back(c + 0.5, r + 0.5);
      }
    }
    return out;
  }

  void validate() const {
    require(width > 0 && height > 0, "MaskImage: empty image");
    require(data.size() == static_cast<std::size_t>(width) * height, "MaskImage: size mismatch");
  }
};

/// Silhouette of `mesh` posed by (R, t) in camera coordinates. A pixel is
/// foreground when its center falls inside a projected triangle. Triangles
/// with a vertex behind the camera are skipped.
inline MaskImage render_mask(const TriMesh& mesh, const Mat3& rotation, const Vec3& translation,
                             const CameraIntrinsics& intr, int width, int height) {
  mesh.validate();
  MaskImage m(width, height);
  std::vector<Vec2> px;
  std::vector<unsigned char> ok;
  for (const auto& v : mesh.vertices) {
    const Projection p = project_camera_point(rotation * v + translation, intr);
    px.push_back(p.pixel);
    ok.push_back(p.valid ? 1 : 0);
  }
  for (const auto& f : mesh.faces) {
    if (!ok[f[0]] || !ok[f[1]] || !ok[f[2]]) continue;
    const Vec2 a = px[f[0]], b = px[f[1]], c = px[f[2]];
    const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    if (area == 0.0) continue;
    const int c0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}))));
    const int c1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}))));
    const int r0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}))));
    const int r1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}))));
    for (int r = r0; r <= r1; ++r) {
      for (int col = c0; col <= c1; ++col) {
        const Vec2 p(col + 0.5, r + 0.5);
        auto edge = [&](const Vec2& u, const Vec2& v) {
          return ((v - u).x() * (p - u).y() - (v - u).y() * (p - u).x()) * area;
        };
        if (edge(a, b) >= 0.0 && edge(b, c) >= 0.0 && edge(c, a) >= 0.0) m.at(r, col) = 1;
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// File formats

inline TriMesh read_obj(std::istream& in) {
  TriMesh m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x() >> v.y() >> v.z())) {
        throw SchemaError("OBJ line " + std::to_string(lineno) + ": malformed vertex");
      }
      m.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        // "i", "i/j", "i//k", "i/j/k": only the vertex index is used.
        try {
          idx.push_back(std::stoi(tok.substr(0, tok.find('/'))) - 1);
        } catch (const std::exception&) {
          throw SchemaError("OBJ line " + std::to_string(lineno) + ": malformed face");
        }
      }
      if (idx.size() < 3) throw SchemaError("OBJ line " + std::to_string(lineno) + ": face needs 3 indices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) m.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  m.validate();
  return m;
}

inline TriMesh read_obj(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw SchemaError("cannot open " + path);
  return read_obj(f);
}

inline void write_obj(std::ostream& out, const TriMesh& m) {
  out.precision(17);
  for (const auto& v : m.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : m.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

/// ASCII PGM (P2). Any nonzero gray value is foreground.
inline MaskImage read_pgm(std::istream& in) {
  auto next = [&in]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] != '#') return tok;
      std::string rest;
      std::getline(in, rest);
    }
    throw SchemaError("PGM: unexpected end of file");
  };
  if (next() != "P2") throw SchemaError("PGM: only the ASCII P2 format is supported");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next());
    h = std::stoi(next());
    maxval = std::stoi(next());
  } catch (const std::invalid_argument&) {
    throw SchemaError("PGM: malformed header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0) throw SchemaError("PGM: invalid header values");
  MaskImage m(w, h);
  for (auto& v : m.data) {
    int g = 0;
    try {
      g = std::stoi(next());
    } catch (const std::invalid_argument&) {
      throw SchemaError("PGM: malformed pixel value");
    }
    if (g < 0 || g > maxval) throw SchemaError("PGM: pixel value out of range");
    v = g > 0 ? 1 : 0;
  }
  return m;
}

inline MaskImage read_pgm(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw SchemaError("cannot open " + path);
  return read_pgm(f);
}

inline void write_pgm(std::ostream& out, const MaskImage& m) {
  out << "P2\n" << m.width << ' ' << m.height << "\n1\n";
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) out << (c ? " " : "") << int(m.at(r, c));
    out << '\n';
  }
}

}  // namespace motionlift
