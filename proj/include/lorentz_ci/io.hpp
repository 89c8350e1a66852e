#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lorentz_ci/error.hpp"
#include "lorentz_ci/hull.hpp"
#include "lorentz_ci/metric_grid.hpp"

namespace lorentz_ci {

/// Wavefront OBJ: `v x y z` at 17 significant digits, 1-based face indices.
inline void write_obj(std::ostream& os, const std::vector<MinkVector>& verts,
                      const std::vector<std::vector<int>>& faces) {
  for (const auto& v : verts) {
    os << "v " << detail::fmt17(v.x) << ' ' << detail::fmt17(v.y) << ' ' << detail::fmt17(v.z) << '\n';
  }
  for (const auto& f : faces) {
    os << 'f';
    for (int i : f) os << ' ' << i + 1;
    os << '\n';
  }
}

/// nx * ny row-major vertex grid (i fast) with quads between neighbours; with
/// `wrap` the last row/column is joined back to the first.
inline void write_grid_obj(std::ostream& os, const std::vector<MinkVector>& verts, int nx, int ny,
                           bool wrap = false) {
  if (nx < 2 || ny < 2 || static_cast<int>(verts.size()) != nx * ny) {
    throw Error(ErrorCode::InvalidArgument, "vertex count does not match the grid");
  }
  std::vector<std::vector<int>> faces;
  const int ix = wrap ? nx : nx - 1, iy = wrap ? ny : ny - 1;
  for (int j = 0; j < iy; ++j) {
    for (int i = 0; i < ix; ++i) {
      const int i1 = (i + 1) % nx, j1 = (j + 1) % ny;
      faces.push_back({j * nx + i, j * nx + i1, j1 * nx + i1, j1 * nx + i});
    }
  }
  write_obj(os, verts, faces);
}

inline void write_obj(std::ostream& os, const Immersion& f, bool wrap = false) {
  const int n = f.grid().n();
  std::vector<MinkVector> verts;
  verts.reserve(f.grid().size());
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) verts.push_back(f.node_value(i, j));
  write_grid_obj(os, verts, n, n, wrap);
}

/// Hull vertices only, reindexed in input order; outward triangles.
inline void write_obj(std::ostream& os, const OrbitHull& hull) {
  std::vector<int> remap(hull.points.size(), -1);
  std::vector<MinkVector> verts;
  for (int i : hull.hull_vertices) {
    remap[i] = static_cast<int>(verts.size());
    verts.push_back(hull.points[i]);
  }
  std::vector<std::vector<int>> faces;
  for (const auto& f : hull.faces) faces.push_back({remap[f.v[0]], remap[f.v[1]], remap[f.v[2]]});
  write_obj(os, verts, faces);
}

/// Writes `content` to `path` in binary mode.
inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path);
  out << content;
  out.close();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

template <class T>
void export_obj(const T& geometry, const std::string& path) {
  std::ostringstream os;
  write_obj(os, geometry);
  write_file(path, os.str());
}

}  // namespace lorentz_ci
