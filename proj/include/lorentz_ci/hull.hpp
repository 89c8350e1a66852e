#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <vector>

#include "lorentz_ci/error.hpp"
#include "lorentz_ci/minkowski.hpp"

namespace lorentz_ci {

namespace detail {

inline mpq_class exact_orient3d(const MinkVector& a, const MinkVector& b, const MinkVector& c,
                                const MinkVector& d) {
  const mpq_class ax = mpq_class(b.x) - a.x, ay = mpq_class(b.y) - a.y, az = mpq_class(b.z) - a.z;
  const mpq_class bx = mpq_class(c.x) - a.x, by = mpq_class(c.y) - a.y, bz = mpq_class(c.z) - a.z;
  const mpq_class cx = mpq_class(d.x) - a.x, cy = mpq_class(d.y) - a.y, cz = mpq_class(d.z) - a.z;
  return ax * (by * cz - bz * cy) - ay * (bx * cz - bz * cx) + az * (bx * cy - by * cx);
}

}  // namespace detail

/// Sign of det[b-a, c-a, d-a]: positive when d lies on the side of the normal
/// (b-a) x (c-a). Floating evaluation with a static error bound, exact
/// rational fallback when the filter cannot decide.
inline int orient3d(const MinkVector& a, const MinkVector& b, const MinkVector& c, const MinkVector& d) {
  const double ax = b.x - a.x, ay = b.y - a.y, az = b.z - a.z;
  const double bx = c.x - a.x, by = c.y - a.y, bz = c.z - a.z;
  const double cx = d.x - a.x, cy = d.y - a.y, cz = d.z - a.z;
  const double m1 = by * cz - bz * cy, m2 = bx * cz - bz * cx, m3 = bx * cy - by * cx;
  const double det = ax * m1 - ay * m2 + az * m3;
  const double perm = std::abs(ax) * (std::abs(by * cz) + std::abs(bz * cy)) +
                      std::abs(ay) * (std::abs(bx * cz) + std::abs(bz * cx)) +
                      std::abs(az) * (std::abs(bx * cy) + std::abs(by * cx));
  // the differences themselves are rounded, hence the generous constant
  const double bound = 1e-14 * perm;
  if (det > bound) return 1;
  if (det < -bound) return -1;
  return sgn(detail::exact_orient3d(a, b, c, d));
}

struct HullFace {
  std::array<int, 3> v;  // outward orientation
  MinkVector normal;     // unit, outward
  double offset = 0.0;   // normal . x = offset on the plane
};

/// Convex hull of a point sample. `faces` index into `points`.
struct OrbitHull {
  MinkVector base;
  std::vector<MinkVector> points;
  std::vector<int> hull_vertices;
  std::vector<HullFace> faces;

  /// max over faces of the signed distance of x to the face plane; <= 0 inside
  double signed_distance(const MinkVector& x) const {
    double d = -std::numeric_limits<double>::infinity();
    for (const auto& f : faces) d = std::max(d, euclid_dot(f.normal, x) - f.offset);
    return d;
  }
};

/// Incremental hull with exact orientation. Points coplanar with a face are
/// treated as inside, so the vertex set is minimal.
inline OrbitHull convex_hull3(const std::vector<MinkVector>& pts, MinkVector base = {0, 0, 1}) {
  const int n = static_cast<int>(pts.size());
  if (n < 4) throw Error(ErrorCode::DegenerateInput, "convex hull needs at least 4 points");

  // initial tetrahedron: farthest pairs in floating point, decided exactly
  int i0 = 0, i1 = -1, i2 = -1, i3 = -1;
  double best = 0.0;
  for (int i = 1; i < n; ++i) {
    const double d = euclid_norm(pts[i] - pts[i0]);
    if (d > best) best = d, i1 = i;
  }
  if (i1 < 0) throw Error(ErrorCode::DegenerateInput, "all points coincide");
  best = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = euclid_norm(euclid_cross(pts[i1] - pts[i0], pts[i] - pts[i0]));
    if (d > best) best = d, i2 = i;
  }
  if (i2 < 0) throw Error(ErrorCode::DegenerateInput, "points are collinear");
  best = 0.0;
  const MinkVector nrm = euclid_cross(pts[i1] - pts[i0], pts[i2] - pts[i0]);
  for (int i = 0; i < n; ++i) {
    const double d = std::abs(euclid_dot(nrm, pts[i] - pts[i0]));
    if (d > best) best = d, i3 = i;
  }
  if (i3 < 0 || orient3d(pts[i0], pts[i1], pts[i2], pts[i3]) == 0) {
    throw Error(ErrorCode::DegenerateInput, "points are coplanar");
  }

  struct Face {
    int a, b, c;
    bool alive;
  };
  std::vector<Face> faces;
  std::unordered_map<long long, int> edge_face;  // directed edge -> face
  auto key = [n](int a, int b) { return static_cast<long long>(a) * n + b; };
  auto add_face = [&](int a, int b, int c) {
    const int id = static_cast<int>(faces.size());
    faces.push_back({a, b, c, true});
    edge_face[key(a, b)] = id;
    edge_face[key(b, c)] = id;
    edge_face[key(c, a)] = id;
  };
  if (orient3d(pts[i0], pts[i1], pts[i2], pts[i3]) > 0) std::swap(i1, i2);
  add_face(i0, i1, i2);
  add_face(i0, i3, i1);
  add_face(i1, i3, i2);
  add_face(i2, i3, i0);

  std::vector<char> visible;
  for (int q = 0; q < n; ++q) {
    if (q == i0 || q == i1 || q == i2 || q == i3) continue;
    visible.assign(faces.size(), 0);
    bool any = false;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!faces[f].alive) continue;
      if (orient3d(pts[faces[f].a], pts[faces[f].b], pts[faces[f].c], pts[q]) > 0) {
        visible[f] = 1;
        any = true;
      }
    }
    if (!any) continue;
    // horizon: edges of visible faces whose twin is hidden
    std::vector<std::pair<int, int>> horizon;
    for (std::size_t f = 0; f < visible.size(); ++f) {
      if (!visible[f]) continue;
      const int e[3][2] = {{faces[f].a, faces[f].b}, {faces[f].b, faces[f].c}, {faces[f].c, faces[f].a}};
      for (const auto& ed : e) {
        const int twin = edge_face.at(key(ed[1], ed[0]));
        if (!visible[twin]) horizon.emplace_back(ed[0], ed[1]);
      }
    }
    for (std::size_t f = 0; f < visible.size(); ++f) {
      if (!visible[f]) continue;
      faces[f].alive = false;
      edge_face.erase(key(faces[f].a, faces[f].b));
      edge_face.erase(key(faces[f].b, faces[f].c));
      edge_face.erase(key(faces[f].c, faces[f].a));
    }
    for (const auto& [a, b] : horizon) add_face(a, b, q);
  }

  OrbitHull hull;
  hull.base = base;
  hull.points = pts;
  std::vector<char> on_hull(n, 0);
  for (const auto& f : faces) {
    if (!f.alive) continue;
    HullFace hf;
    hf.v = {f.a, f.b, f.c};
    MinkVector c = euclid_cross(pts[f.b] - pts[f.a], pts[f.c] - pts[f.a]);
    c *= 1.0 / euclid_norm(c);
    hf.normal = c;
    hf.offset = euclid_dot(c, pts[f.a]);
    hull.faces.push_back(hf);
    on_hull[f.a] = on_hull[f.b] = on_hull[f.c] = 1;
  }
  for (int i = 0; i < n; ++i)
    if (on_hull[i]) hull.hull_vertices.push_back(i);
  return hull;
}

/// First point where the ray t (qx, qy, 1), t > 0, meets the hull.
inline MinkVector ray_boundary_point(const OrbitHull& hull, double qx, double qy) {
  const MinkVector d{qx, qy, 1.0};
  double t_in = -std::numeric_limits<double>::infinity();
  double t_out = std::numeric_limits<double>::infinity();
  for (const auto& f : hull.faces) {
    const double nd = euclid_dot(f.normal, d);
    if (nd < 0.0) {
      t_in = std::max(t_in, f.offset / nd);
    } else if (nd > 0.0) {
      t_out = std::min(t_out, f.offset / nd);
    } else if (f.offset < 0.0) {
      t_in = std::numeric_limits<double>::infinity();  // parallel and outside
    }
  }
  const double slack = 1e-12 * std::max(1.0, std::abs(t_out));
  if (!(t_in > 0.0) || !(t_in <= t_out + slack) || !std::isfinite(t_in)) {
    throw Error(ErrorCode::RayMissesHull, "Klein point outside the hull shadow");
  }
  return t_in * d;
}

}  // namespace lorentz_ci
