#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lorentz_ci/error.hpp"
#include "lorentz_ci/hull.hpp"
#include "lorentz_ci/minkowski.hpp"

namespace lorentz_ci {

/// Generators and a defining relator. The relator is a word of signed,
/// 1-based generator indices (-k is the inverse of generator k).
struct FuchsianGroup {
  std::vector<Isometry21> generators;
  std::vector<int> relator;
  double boost_length = 0.0;

  Isometry21 letter(int s) const {
    const Isometry21& g = generators.at(std::abs(s) - 1);
    return s > 0 ? g : g.inverse();
  }

  Isometry21 relator_product() const {
    Isometry21 w;
    for (int s : relator) w = w * letter(s);
    return w;
  }

  double relator_defect() const { return mat3_max_abs_diff(relator_product().matrix(), mat3_identity()); }
};

namespace detail {

// regular octagon with angle sum 2 pi; opposite sides are paired by boosts
// through the centre
inline std::vector<Isometry21> octagon_generators(double ell) {
  std::vector<Isometry21> g;
  for (int k = 0; k < 4; ++k) g.push_back(boost_rotation(k * M_PI / 4.0, ell));
  return g;
}

inline const std::vector<int>& octagon_relator() {
  static const std::vector<int> w{1, -2, 3, -4, -1, 2, -3, 4};
  return w;
}

// signed rotation angle of the relator product; vanishes at the genus-2 length
inline double octagon_signed_defect(double ell) {
  FuchsianGroup g{octagon_generators(ell), octagon_relator(), ell};
  const Mat3 m = g.relator_product().matrix();
  return std::atan2(m[1][0] - m[0][1], m[0][0] + m[1][1]);
}

}  // namespace detail

inline constexpr double kRelatorTolerance = 1e-8;

/// Regular-octagon surface group of genus 2. The translation length is found
/// by bracketing the relator defect around 2 arccosh(1 + sqrt 2).
inline FuchsianGroup make_genus2_group() {
  const double hint = 2.0 * std::acosh(1.0 + std::sqrt(2.0));
  double lo = hint - 0.03, hi = hint + 0.03;
  double flo = detail::octagon_signed_defect(lo), fhi = detail::octagon_signed_defect(hi);
  if (!(flo * fhi < 0.0)) throw Error(ErrorCode::RelatorNotSatisfied, "relator defect does not change sign");
  // Illinois-modified regula falsi; converges superlinearly on this smooth defect
  int side = 0;
  double ell = hint;
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hint; ++it) {
    ell = (lo * fhi - hi * flo) / (fhi - flo);
    if (!(ell > lo && ell < hi)) ell = 0.5 * (lo + hi);
    const double f = detail::octagon_signed_defect(ell);
    if (f == 0.0) break;
    if ((f < 0.0) == (flo < 0.0)) {
      lo = ell, flo = f;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = ell, fhi = f;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
  }
  FuchsianGroup g{detail::octagon_generators(ell), detail::octagon_relator(), ell};
  if (!(g.relator_defect() <= kRelatorTolerance)) {
    throw Error(ErrorCode::RelatorNotSatisfied, "relator defect " + std::to_string(g.relator_defect()));
  }
  return g;
}

namespace detail {

// Deduplicates points up to a relative tolerance. Cells are scaled by the
// binary exponent of z so that far points are compared relative to their size.
class PointSet {
 public:
  explicit PointSet(double tol) : tol_(tol) {}

  /// Inserts p unless a point within tolerance is present; returns true if new.
  bool insert(const MinkVector& p) {
    const int e = std::ilogb(std::max(1.0, std::abs(p.z)));
    for (int de = -1; de <= 1; ++de) {
      const double h = cell(e + de);
      const long long cx = std::llround(p.x / h), cy = std::llround(p.y / h), cz = std::llround(p.z / h);
      for (long long dx = -1; dx <= 1; ++dx)
        for (long long dy = -1; dy <= 1; ++dy)
          for (long long dz = -1; dz <= 1; ++dz) {
            auto it = map_.find(Key{e + de, cx + dx, cy + dy, cz + dz});
            if (it == map_.end()) continue;
            for (int idx : it->second) {
              const MinkVector& q = points_[idx];
              const double scale = std::max(1.0, std::max(std::abs(p.z), std::abs(q.z)));
              const MinkVector d = p - q;
              if (std::max({std::abs(d.x), std::abs(d.y), std::abs(d.z)}) <= tol_ * scale) return false;
            }
          }
    }
    const double h = cell(e);
    map_[Key{e, std::llround(p.x / h), std::llround(p.y / h), std::llround(p.z / h)}].push_back(
        static_cast<int>(points_.size()));
    points_.push_back(p);
    return true;
  }

  const std::vector<MinkVector>& points() const { return points_; }

 private:
  struct Key {
    int e;
    long long x, y, z;
    bool operator==(const Key& o) const { return e == o.e && x == o.x && y == o.y && z == o.z; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::size_t h = std::hash<long long>()(k.x);
      h = h * 1000003u ^ std::hash<long long>()(k.y);
      h = h * 1000003u ^ std::hash<long long>()(k.z);
      return h * 1000003u ^ std::hash<int>()(k.e);
    }
  };

  double cell(int e) const { return 4.0 * tol_ * std::ldexp(1.0, e); }

  double tol_;
  std::vector<MinkVector> points_;
  std::unordered_map<Key, std::vector<int>, KeyHash> map_;
};

}  // namespace detail

inline constexpr double kOrbitDedupTolerance = 1e-9;

/// Orbit of p under all words of length <= word_len, deduplicated. With a
/// finite `radius` only words whose tile centre g(0,0,1) lies within that
/// hyperbolic distance of the origin are kept and expanded; for the octagon
/// group this keeps every tile meeting a slightly smaller disc.
inline std::vector<MinkVector> orbit(const FuchsianGroup& group, const MinkVector& p, int word_len,
                                     double radius = std::numeric_limits<double>::infinity()) {
  if (word_len < 0) throw Error(ErrorCode::InvalidArgument, "word_len must be >= 0");
  const auto lvl = cone_level(p);
  if (!lvl || std::abs(*lvl - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "base point not on the hyperboloid");
  const double zmax = std::isfinite(radius) ? std::cosh(radius) : std::numeric_limits<double>::infinity();

  std::vector<Isometry21> letters;
  for (std::size_t k = 0; k < group.generators.size(); ++k) {
    letters.push_back(group.generators[k]);
    letters.push_back(group.generators[k].inverse());
  }
  // elements are identified by the image of the origin, which no nontrivial
  // element of a torsion-free group fixes
  detail::PointSet seen(kOrbitDedupTolerance);
  std::vector<MinkVector> out;
  std::vector<Isometry21> frontier{Isometry21()};
  seen.insert(MinkVector{0, 0, 1});
  out.push_back(p);
  for (int len = 1; len <= word_len && !frontier.empty(); ++len) {
    std::vector<Isometry21> next;
    for (const auto& g : frontier) {
      for (const auto& s : letters) {
        const Isometry21 h = g * s;
        if (h.matrix()[2][2] > zmax) continue;
        if (!seen.insert(h.apply(MinkVector{0, 0, 1}))) continue;
        out.push_back(h.apply(p));
        next.push_back(h);
      }
    }
    frontier = std::move(next);
  }
  return out;
}

/// Level of the midpoint of two unit-hyperboloid points, squared: (1 - <a,b>)/2.
inline double midpoint_level_squared(const MinkVector& a, const MinkVector& b) {
  return 0.5 * (1.0 - lorentz_dot(a, b));
}

namespace detail {

inline double level_sq(const MinkVector& x) { return -lorentz_dot(x, x); }

struct FrankWolfeResult {
  double value;  // max level^2
  MinkVector argmax;
  int iterations;
};

// Away-step Frank-Wolfe for max -<x,x> over conv(atoms). The objective is
// concave on any spacelike affine plane and on the solid cone, so the exact
// line search along d solves -<x+t d, x+t d> with <d,d> > 0.
inline FrankWolfeResult maximize_level_sq(const std::vector<MinkVector>& atoms, int max_iter = 200,
                                          double gap_tol = 1e-10) {
  const int m = static_cast<int>(atoms.size());
  if (m == 0) throw Error(ErrorCode::DegenerateInput, "no atoms");
  std::vector<double> w(m, 0.0);
  int start = 0;
  for (int i = 1; i < m; ++i)
    if (level_sq(atoms[i]) > level_sq(atoms[start])) start = i;
  w[start] = 1.0;
  MinkVector x = atoms[start];
  int it = 0;
  for (; it < max_iter; ++it) {
    // gradient of -<x,x> is -2 J x; use g = -J x (positive multiple)
    const MinkVector g{-x.x, -x.y, x.z};
    int s = 0, a = -1;
    double gs = -INFINITY, ga = INFINITY;
    for (int i = 0; i < m; ++i) {
      const double v = euclid_dot(g, atoms[i]);
      if (v > gs) gs = v, s = i;
      if (w[i] > 0.0 && v < ga) ga = v, a = i;
    }
    const double gx = euclid_dot(g, x);
    const double gap = 2.0 * (gs - gx);
    if (gap <= gap_tol * std::max(1.0, level_sq(x))) break;
    MinkVector d;
    double tmax;
    bool toward = gs - gx >= gx - ga;
    if (toward) {
      d = atoms[s] - x;
      tmax = 1.0;
    } else {
      d = x - atoms[a];
      tmax = w[a] / (1.0 - w[a]);
      if (!(tmax > 0.0) || !std::isfinite(tmax)) toward = true, d = atoms[s] - x, tmax = 1.0;
    }
    const double dd = lorentz_dot(d, d);
    double t = tmax;
    if (dd > 0.0) t = std::clamp(-lorentz_dot(x, d) / dd, 0.0, tmax);
    if (toward) {
      for (double& wi : w) wi *= 1.0 - t;
      w[s] += t;
    } else {
      for (double& wi : w) wi *= 1.0 + t;
      w[a] -= t;
      if (t == tmax) w[a] = 0.0;
    }
    x = x + t * d;
  }
  return {level_sq(x), x, it};
}

}  // namespace detail

/// Maximum of the level over the whole hull (Frank-Wolfe on the hull vertices).
inline double level_alpha(const OrbitHull& hull) {
  if (hull.faces.empty()) throw Error(ErrorCode::DegenerateInput, "empty hull");
  std::vector<MinkVector> atoms;
  for (int i : hull.hull_vertices) atoms.push_back(hull.points[i]);
  return std::sqrt(std::max(1.0, detail::maximize_level_sq(atoms).value));
}

/// Convex polygon in the Klein disc, counter-clockwise.
using KleinPolygon = std::vector<std::array<double, 2>>;

inline double polygon_area(const KleinPolygon& p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& u = p[i];
    const auto& v = p[(i + 1) % p.size()];
    a += u[0] * v[1] - u[1] * v[0];
  }
  return 0.5 * a;
}

/// Klein image of the regular octagon fundamental domain: apothem tanh(ell/2),
/// side midpoints at angles k pi/4.
inline KleinPolygon klein_octagon(double boost_length) {
  const double r = std::tanh(0.5 * boost_length) / std::cos(M_PI / 8.0);
  KleinPolygon p;
  for (int k = 0; k < 8; ++k) {
    const double t = k * M_PI / 4.0 + M_PI / 8.0;
    p.push_back({r * std::cos(t), r * std::sin(t)});
  }
  return p;
}

namespace detail {

// Sutherland-Hodgman against a convex counter-clockwise clip polygon
inline KleinPolygon clip_polygon(KleinPolygon subject, const KleinPolygon& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const auto& a = clip[e];
    const auto& b = clip[(e + 1) % clip.size()];
    auto side = [&](const std::array<double, 2>& p) {
      return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    };
    KleinPolygon out;
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const auto& p = subject[i];
      const auto& q = subject[(i + 1) % subject.size()];
      const double sp = side(p), sq = side(q);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) {
        const double t = sp / (sp - sq);
        out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
      }
    }
    subject = std::move(out);
  }
  return subject;
}

}  // namespace detail

inline constexpr double kCoverageTolerance = 1e-9;

/// Maximum level over the part of the hull boundary facing the origin that
/// lies radially above `domain`. By equivariance this is the maximum over the
/// whole boundary once `domain` is a fundamental domain of the group.
inline double boundary_alpha(const OrbitHull& hull, const KleinPolygon& domain) {
  double best = 0.0, covered = 0.0;
  for (const auto& f : hull.faces) {
    if (!(f.offset < 0.0)) continue;  // faces seen from the origin
    KleinPolygon tri;
    for (int i : f.v) {
      const auto [qx, qy] = klein_project(hull.points[i]);
      tri.push_back({qx, qy});
    }
    // seen from above the Klein image of an outward face visible from the
    // origin is clockwise
    std::reverse(tri.begin(), tri.end());
    const KleinPolygon piece = detail::clip_polygon(tri, domain);
    if (piece.size() < 3) continue;
    covered += polygon_area(piece);
    std::vector<MinkVector> lifted;
    for (const auto& q : piece) {
      const MinkVector d{q[0], q[1], 1.0};
      lifted.push_back((f.offset / euclid_dot(f.normal, d)) * d);
    }
    best = std::max(best, detail::maximize_level_sq(lifted).value);
  }
  const double area = polygon_area(domain);
  if (!(std::abs(covered - area) <= kCoverageTolerance * area)) {
    throw Error(ErrorCode::FundamentalDomainNotCovered,
                "hull shadow covers " + std::to_string(covered) + " of " + std::to_string(area));
  }
  return std::sqrt(std::max(1.0, best));
}

struct RigidityConstants {
  double alpha;
  double big_c;    // alpha^2
  double small_c;  // 1 - 1/alpha^2
  double c_prime;  // 1/alpha^2
};

inline RigidityConstants rigidity_constants(double alpha) {
  if (!(alpha > 1.0)) throw Error(ErrorCode::AlphaNotAboveOne, "alpha must exceed 1");
  const double a2 = alpha * alpha;
  return {alpha, a2, 1.0 - 1.0 / a2, 1.0 / a2};
}

/// Whether the line z = a x + r in the (x, z) plane meets z^2 - x^2 = alpha^2.
inline bool line_meets_level(double a, double r, double alpha) {
  return a * a > 1.0 - r * r / (alpha * alpha);
}

/// Default tile-centre radius for orbit pruning in the alpha computations.
inline constexpr double kOrbitRadius = 7.0;

struct AlphaEstimate {
  int word_len;
  std::size_t orbit_size;
  double alpha;
  OrbitHull hull;
};

inline AlphaEstimate estimate_alpha(const FuchsianGroup& group, const MinkVector& base, int word_len,
                                    double radius = kOrbitRadius) {
  const auto pts = orbit(group, base, word_len, radius);
  OrbitHull hull = convex_hull3(pts, base);
  const double a = boundary_alpha(hull, klein_octagon(group.boost_length));
  return {word_len, pts.size(), a, std::move(hull)};
}

/// Max of the boundary alpha over a grid x grid sample of base points with
/// Klein coordinates in [-extent, extent]^2.
inline double uniform_alpha(const FuchsianGroup& group, int word_len, int grid = 5, double extent = 0.6,
                            double radius = kOrbitRadius) {
  double best = 1.0;
  for (int j = 0; j < grid; ++j) {
    for (int i = 0; i < grid; ++i) {
      const double qx = grid == 1 ? 0.0 : -extent + 2.0 * extent * i / (grid - 1);
      const double qy = grid == 1 ? 0.0 : -extent + 2.0 * extent * j / (grid - 1);
      best = std::max(best, estimate_alpha(group, klein_lift(qx, qy), word_len, radius).alpha);
    }
  }
  return best;
}

// ---- convex graphs --------------------------------------------------------

/// Square grid on [-half_width, half_width]^2 with n nodes per side.
struct GraphGrid {
  int n;
  double half_width;

  double coord(int i) const { return -half_width + 2.0 * half_width * i / (n - 1); }
  double spacing() const { return 2.0 * half_width / (n - 1); }
};

struct ConvexGraphReport {
  std::vector<double> kappa;  // interior nodes, row-major (j slow), (n-2)^2 entries
  double kappa_min = INFINITY;
  double kappa_max = -INFINITY;
  double min_spacelike = INFINITY;  // min of 1 - |grad u|^2
  bool convex = true;               // Hessian positive semidefinite everywhere
  // generalized eigenvalues of the graph metric against the hyperbolic metric
  // pulled back by radial projection
  double metric_ratio_min = INFINITY;
  double metric_ratio_max = -INFINITY;
};

/// Curvature of the graph of u by second-order central differences on the
/// interior nodes, plus the two-sided comparison with the hyperbolic metric.
inline ConvexGraphReport verify_convex_graph(const GraphGrid& grid, const std::vector<double>& u) {
  const int n = grid.n;
  if (n < 3 || static_cast<int>(u.size()) != n * n) throw Error(ErrorCode::InvalidArgument, "bad graph grid");
  const double h = grid.spacing();
  auto at = [&](int i, int j) { return u[static_cast<std::size_t>(j) * n + i]; };
  ConvexGraphReport rep;
  rep.kappa.reserve(static_cast<std::size_t>(n - 2) * (n - 2));
  for (int j = 1; j < n - 1; ++j) {
    for (int i = 1; i < n - 1; ++i) {
      const double ux = (at(i + 1, j) - at(i - 1, j)) / (2 * h);
      const double uy = (at(i, j + 1) - at(i, j - 1)) / (2 * h);
      const double uxx = (at(i + 1, j) - 2 * at(i, j) + at(i - 1, j)) / (h * h);
      const double uyy = (at(i, j + 1) - 2 * at(i, j) + at(i, j - 1)) / (h * h);
      const double uxy = (at(i + 1, j + 1) - at(i - 1, j + 1) - at(i + 1, j - 1) + at(i - 1, j - 1)) / (4 * h * h);
      const double s = 1.0 - ux * ux - uy * uy;
      rep.min_spacelike = std::min(rep.min_spacelike, s);
      if (!(s > 0.0)) {
        throw Error(ErrorCode::NotSpacelikeGraph,
                    "1 - |grad u|^2 <= 0 at node (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      }
      const double hdet = uxx * uyy - uxy * uxy;
      const double k = -hdet / (s * s);
      rep.kappa.push_back(k);
      rep.kappa_min = std::min(rep.kappa_min, k);
      rep.kappa_max = std::max(rep.kappa_max, k);
      if (uxx < 0.0 || uyy < 0.0 || hdet < 0.0) rep.convex = false;

      // graph metric dx^2 + dy^2 - du^2
      const double mE = 1 - ux * ux, mF = -ux * uy, mG = 1 - uy * uy;
      // q = (x, y)/u, hyperbolic metric in Klein coordinates
      const double x = grid.coord(i), y = grid.coord(j), uu = at(i, j);
      if (!(uu > std::hypot(x, y))) throw Error(ErrorCode::NotSpacelikeGraph, "graph leaves the future cone");
      const double qx = x / uu, qy = y / uu;
      const double dq[2][2] = {{1 / uu - x * ux / (uu * uu), -x * uy / (uu * uu)},
                               {-y * ux / (uu * uu), 1 / uu - y * uy / (uu * uu)}};
      const double w = 1.0 - qx * qx - qy * qy;
      const double kE = 1 / w + qx * qx / (w * w), kF = qx * qy / (w * w), kG = 1 / w + qy * qy / (w * w);
      // pull back: h = dq^T K dq
      double H[2][2];
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          H[a][b] = dq[0][a] * (kE * dq[0][b] + kF * dq[1][b]) + dq[1][a] * (kF * dq[0][b] + kG * dq[1][b]);
      // generalized eigenvalues of (m, h)
      const double dH = H[0][0] * H[1][1] - H[0][1] * H[1][0];
      const double dM = mE * mG - mF * mF;
      const double tr = mE * H[1][1] + mG * H[0][0] - 2 * mF * H[0][1];
      const double disc = std::max(0.0, tr * tr - 4 * dH * dM);
      const double hi = (tr + std::sqrt(disc)) / (2 * dH);
      const double lo = (dM / dH) / hi;
      rep.metric_ratio_min = std::min(rep.metric_ratio_min, lo);
      rep.metric_ratio_max = std::max(rep.metric_ratio_max, hi);
    }
  }
  return rep;
}

inline std::vector<double> sample_graph(const GraphGrid& grid, const std::function<double(double, double)>& u) {
  std::vector<double> out(static_cast<std::size_t>(grid.n) * grid.n);
  for (int j = 0; j < grid.n; ++j)
    for (int i = 0; i < grid.n; ++i) out[static_cast<std::size_t>(j) * grid.n + i] = u(grid.coord(i), grid.coord(j));
  return out;
}

}  // namespace lorentz_ci
