#pragma once

// Periodic fields on the unit-square torus C = [0,1]^2 / Z^2: scalar and
// symmetric-tensor fields, immersions into R^{2,1}, their pullback metrics,
// C0 distances and the dilatation of the identity between two metrics.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "lorentz_ci/error.hpp"
#include "lorentz_ci/minkowski.hpp"

namespace lorentz_ci {

class PeriodicGrid {
 public:
  explicit PeriodicGrid(int n) : n_(n) {
    if (n < 8) throw Error(ErrorCode::InvalidArgument, "periodic grid needs n >= 8");
  }

  int n() const { return n_; }
  double spacing() const { return 1.0 / n_; }
  std::size_t size() const { return std::size_t(n_) * std::size_t(n_); }

  int wrap(int i) const {
    const int r = i % n_;
    return r < 0 ? r + n_ : r;
  }
  /// Row-major: j (the y index) is the slow index.
  std::size_t index(int i, int j) const { return std::size_t(wrap(j)) * n_ + std::size_t(wrap(i)); }
  double coord(int i) const { return double(i) / n_; }

  bool operator==(const PeriodicGrid& o) const { return n_ == o.n_; }
  bool operator!=(const PeriodicGrid& o) const { return n_ != o.n_; }

 private:
  int n_;
};

/// E dx^2 + 2F dx dy + G dy^2.
struct Sym2 {
  double E = 0.0;
  double F = 0.0;
  double G = 0.0;

  double det() const { return E * G - F * F; }
  bool is_positive_definite() const { return E > 0.0 && G > 0.0 && det() > 0.0; }
  /// Value of the form on the vector (a, b).
  double eval(double a, double b) const { return E * a * a + 2.0 * F * a * b + G * b * b; }

  /// Eigenvalues (min, max) of [[E, F], [F, G]].
  std::pair<double, double> eigenvalues() const {
    const double mean = 0.5 * (E + G);
    const double rad = std::hypot(0.5 * (E - G), F);
    return {mean - rad, mean + rad};
  }
  double spectral_norm() const {
    const auto [lo, hi] = eigenvalues();
    return std::max(std::abs(lo), std::abs(hi));
  }
  Sym2 inverse() const {
    const double d = det();
    return {G / d, -F / d, E / d};
  }

  Sym2& operator+=(const Sym2& o) {
    E += o.E;
    F += o.F;
    G += o.G;
    return *this;
  }
  Sym2& operator-=(const Sym2& o) {
    E -= o.E;
    F -= o.F;
    G -= o.G;
    return *this;
  }
};

inline Sym2 operator+(Sym2 a, const Sym2& b) { return a += b; }
inline Sym2 operator-(Sym2 a, const Sym2& b) { return a -= b; }
inline Sym2 operator*(double s, const Sym2& a) { return {s * a.E, s * a.F, s * a.G}; }

/// l (x) l for the 1-form l = a dx + b dy.
inline Sym2 form_square(double a, double b) { return {a * a, a * b, b * b}; }

/// Generalised eigenvalues (min, max) of the pencil (g2, g1): the extreme
/// values of g2(v)/g1(v) over directions v. Both forms must be positive
/// definite. Reduced to the symmetric S = L^-1 g2 L^-T with g1 = L L^T, so a
/// conformal pair gives a zero spread without cancellation.
inline std::pair<double, double> pencil_eigenvalues(const Sym2& g2, const Sym2& g1) {
  const double l11 = std::sqrt(g1.E);
  const double l21 = g1.F / l11;
  const double l22 = std::sqrt(g1.G - l21 * l21);
  // S = M g2 M^T with M = L^-1 = [[1/l11, 0], [-l21/(l11 l22), 1/l22]]
  const double m11 = 1.0 / l11, m21 = -l21 / (l11 * l22), m22 = 1.0 / l22;
  const double s11 = m11 * m11 * g2.E;
  const double s12 = m11 * (m21 * g2.E + m22 * g2.F);
  const double s22 = m21 * m21 * g2.E + 2.0 * m21 * m22 * g2.F + m22 * m22 * g2.G;
  const double mean = 0.5 * (s11 + s22);
  const double rad = std::hypot(0.5 * (s11 - s22), s12);
  const double hi = mean + rad;
  // product of the eigenvalues is det g2 / det g1
  const double lo = (g2.det() / g1.det()) / hi;
  return {lo, hi};
}

inline Sym2 pullback_at(const MinkVector& tx, const MinkVector& ty) {
  return {lorentz_dot(tx, tx), lorentz_dot(tx, ty), lorentz_dot(ty, ty)};
}

class ScalarField {
 public:
  ScalarField(PeriodicGrid grid, double value) : grid_(grid), values_(grid.size(), value), constant_(true) {}
  ScalarField(PeriodicGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw Error(ErrorCode::GridMismatch, "scalar field size");
    constant_ = min() == max();
  }

  static ScalarField from_function(PeriodicGrid grid, const std::function<double(double, double)>& fn) {
    std::vector<double> v(grid.size());
    for (int j = 0; j < grid.n(); ++j)
      for (int i = 0; i < grid.n(); ++i) v[grid.index(i, j)] = fn(grid.coord(i), grid.coord(j));
    return ScalarField(grid, std::move(v));
  }

  const PeriodicGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double at(int i, int j) const { return values_[grid_.index(i, j)]; }

  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  bool is_constant() const { return constant_; }
  bool is_zero() const { return min() == 0.0 && max() == 0.0; }

  /// Periodic Catmull-Rom interpolation (C1, exact on nodes and for constants).
  double sample(double x, double y) const {
    if (constant_) return values_[0];
    const int n = grid_.n();
    const double gx = x * n, gy = y * n;
    const double fx = std::floor(gx), fy = std::floor(gy);
    const int i0 = int(fx), j0 = int(fy);
    const double tx = gx - fx, ty = gy - fy;
    double wx[4], wy[4];
    catmull_rom_weights(tx, wx);
    catmull_rom_weights(ty, wy);
    double s = 0.0;
    for (int b = 0; b < 4; ++b) {
      double row = 0.0;
      for (int a = 0; a < 4; ++a) row += wx[a] * at(i0 - 1 + a, j0 - 1 + b);
      s += wy[b] * row;
    }
    return s;
  }

 private:
  static void catmull_rom_weights(double t, double w[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
    w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
    w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
    w[3] = 0.5 * (t3 - t2);
  }

  PeriodicGrid grid_;
  std::vector<double> values_;
  bool constant_ = false;
};

class MetricField {
 public:
  MetricField(PeriodicGrid grid, const Sym2& value) : grid_(grid), values_(grid.size(), value) {}
  MetricField(PeriodicGrid grid, std::vector<Sym2> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw Error(ErrorCode::GridMismatch, "metric field size");
    for (const auto& s : values_) {
      if (!std::isfinite(s.E) || !std::isfinite(s.F) || !std::isfinite(s.G)) {
        throw Error(ErrorCode::InvalidArgument, "non-finite metric coefficient");
      }
    }
  }

  static MetricField from_function(PeriodicGrid grid, const std::function<Sym2(double, double)>& fn) {
    std::vector<Sym2> v(grid.size());
    for (int j = 0; j < grid.n(); ++j)
      for (int i = 0; i < grid.n(); ++i) v[grid.index(i, j)] = fn(grid.coord(i), grid.coord(j));
    return MetricField(grid, std::move(v));
  }

  const PeriodicGrid& grid() const { return grid_; }
  const std::vector<Sym2>& values() const { return values_; }
  const Sym2& at(int i, int j) const { return values_[grid_.index(i, j)]; }

  bool is_positive_definite() const {
    return std::all_of(values_.begin(), values_.end(), [](const Sym2& s) { return s.is_positive_definite(); });
  }

  /// Smallest eigenvalue over all nodes.
  double min_eigenvalue() const {
    double m = INFINITY;
    for (const auto& s : values_) m = std::min(m, s.eigenvalues().first);
    return m;
  }

  MetricField scaled(double c) const {
    std::vector<Sym2> v(values_.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = c * values_[k];
    return MetricField(grid_, std::move(v));
  }

  friend MetricField operator-(const MetricField& a, const MetricField& b) {
    a.require_same_grid(b);
    std::vector<Sym2> v(a.values_.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = a.values_[k] - b.values_[k];
    return MetricField(a.grid_, std::move(v));
  }
  friend MetricField operator+(const MetricField& a, const MetricField& b) {
    a.require_same_grid(b);
    std::vector<Sym2> v(a.values_.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = a.values_[k] + b.values_[k];
    return MetricField(a.grid_, std::move(v));
  }

  void require_same_grid(const MetricField& o) const {
    if (grid_ != o.grid_) throw Error(ErrorCode::GridMismatch, "metric fields live on different grids");
  }

 private:
  PeriodicGrid grid_;
  std::vector<Sym2> values_;
};

/// eta * l (x) l node-wise.
inline MetricField weighted_form_square(const ScalarField& eta, double a, double b) {
  std::vector<Sym2> v(eta.grid().size());
  const Sym2 sq = form_square(a, b);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = eta.values()[k] * sq;
  return MetricField(eta.grid(), std::move(v));
}

// ---------------------------------------------------------------------------
// Immersions

/// Value and first partials of a map C -> R^{2,1} at one parameter point.
struct Jet {
  MinkVector value;
  MinkVector dx;
  MinkVector dy;
};

/// A map defined at every parameter point, with analytic (or semi-analytic)
/// first derivatives. Implementations must be thread-compatible and pure.
class ChartMap {
 public:
  virtual ~ChartMap() = default;
  virtual Jet jet(double x, double y) const = 0;
  /// Jet at grid node (i, j) of an n-grid; overridden where node phases are exact.
  virtual Jet node_jet(int i, int j, int n) const { return jet(double(i) / n, double(j) / n); }
  /// Highest spatial frequency present in the map; later stages use it to
  /// size their finite-difference steps.
  virtual double frequency() const { return 1.0; }
};

class FunctionChart final : public ChartMap {
 public:
  explicit FunctionChart(std::function<Jet(double, double)> fn, double frequency = 1.0)
      : fn_(std::move(fn)), frequency_(frequency) {}
  Jet jet(double x, double y) const override { return fn_(x, y); }
  double frequency() const override { return frequency_; }

 private:
  std::function<Jet(double, double)> fn_;
  double frequency_;
};

/// Images of the deck translations e_x, e_y: F(p + e_k) = F(p) + row_k.
struct LinearPart {
  MinkVector ex{1.0, 0.0, 0.0};
  MinkVector ey{0.0, 1.0, 0.0};

  MinkVector apply(double x, double y) const { return x * ex + y * ey; }
};

enum class DerivativeMode { AnalyticJacobian, CenteredDifference };

class Immersion;
namespace detail {
std::shared_ptr<const ChartMap> make_interpolating_chart(const Immersion& f);
}

/// Z^2-equivariant map p -> linear_part(p) + periodic_part(p), stored on grid
/// nodes. Analytic immersions keep the chart they were sampled from and
/// store exact node tangents; tabulated ones differentiate node values with
/// centred differences of step 1/n.
class Immersion {
 public:
  static Immersion analytic(PeriodicGrid grid, LinearPart linear, std::shared_ptr<const ChartMap> chart) {
    Immersion f(grid, linear, DerivativeMode::AnalyticJacobian);
    f.chart_ = std::move(chart);
    const int n = grid.n();
    f.periodic_.resize(grid.size());
    f.tangents_.resize(grid.size());
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const Jet jt = f.chart_->node_jet(i, j, n);
        const std::size_t k = grid.index(i, j);
        f.periodic_[k] = jt.value - linear.apply(grid.coord(i), grid.coord(j));
        f.tangents_[k] = {jt.dx, jt.dy};
      }
    }
    return f;
  }

  static Immersion tabulated(PeriodicGrid grid, LinearPart linear, std::vector<MinkVector> periodic) {
    if (periodic.size() != grid.size()) throw Error(ErrorCode::GridMismatch, "periodic part size");
    Immersion f(grid, linear, DerivativeMode::CenteredDifference);
    f.periodic_ = std::move(periodic);
    const int n = grid.n();
    f.tangents_.resize(grid.size());
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const MinkVector tx = (f.node_value(i + 1, j) - f.node_value(i - 1, j)) * (0.5 * n);
        const MinkVector ty = (f.node_value(i, j + 1) - f.node_value(i, j - 1)) * (0.5 * n);
        f.tangents_[grid.index(i, j)] = {tx, ty};
      }
    }
    f.chart_ = detail::make_interpolating_chart(f);
    return f;
  }

  /// The flat square torus (x, y) -> (x, y, 0).
  static Immersion flat_plane(PeriodicGrid grid) {
    auto chart = std::make_shared<FunctionChart>([](double x, double y) {
      return Jet{{x, y, 0.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
    });
    return analytic(grid, LinearPart{}, chart);
  }

  const PeriodicGrid& grid() const { return grid_; }
  const LinearPart& linear_part() const { return linear_; }
  DerivativeMode derivative_mode() const { return mode_; }
  const ChartMap& chart() const { return *chart_; }
  std::shared_ptr<const ChartMap> chart_ptr() const { return chart_; }
  const std::vector<MinkVector>& periodic_part() const { return periodic_; }

  /// F at node (i, j) for any integers; nodes outside [0,n)^2 are reached
  /// through the deck translations.
  MinkVector node_value(int i, int j) const {
    const int n = grid_.n();
    const int ri = grid_.wrap(i), rj = grid_.wrap(j);
    const int qi = (i - ri) / n, qj = (j - rj) / n;
    MinkVector v = periodic_[grid_.index(ri, rj)] + linear_.apply(grid_.coord(ri), grid_.coord(rj));
    if (qi != 0) v += double(qi) * linear_.ex;
    if (qj != 0) v += double(qj) * linear_.ey;
    return v;
  }

  std::pair<MinkVector, MinkVector> node_tangents(int i, int j) const {
    return tangents_[grid_.index(i, j)];
  }

  Jet jet(double x, double y) const { return chart_->jet(x, y); }

 private:
  Immersion(PeriodicGrid grid, LinearPart linear, DerivativeMode mode) : grid_(grid), linear_(linear), mode_(mode) {}

  PeriodicGrid grid_;
  LinearPart linear_;
  DerivativeMode mode_;
  std::shared_ptr<const ChartMap> chart_;
  std::vector<MinkVector> periodic_;
  std::vector<std::pair<MinkVector, MinkVector>> tangents_;
};

namespace detail {

/// Periodic Catmull-Rom interpolant of a tabulated immersion, so that
/// tabulated maps can be corrugated like analytic ones.
class InterpolatingChart final : public ChartMap {
 public:
  explicit InterpolatingChart(const Immersion& f)
      : grid_(f.grid()), linear_(f.linear_part()), periodic_(f.periodic_part()) {}

  Jet jet(double x, double y) const override {
    const int n = grid_.n();
    const double gx = x * n, gy = y * n;
    const double fx = std::floor(gx), fy = std::floor(gy);
    const int i0 = int(fx), j0 = int(fy);
    const double tx = gx - fx, ty = gy - fy;
    double wx[4], wy[4], dwx[4], dwy[4];
    weights(tx, wx, dwx);
    weights(ty, wy, dwy);
    Jet out{linear_.apply(x, y), linear_.ex, linear_.ey};
    for (int b = 0; b < 4; ++b) {
      for (int a = 0; a < 4; ++a) {
        const MinkVector& v = periodic_[grid_.index(i0 - 1 + a, j0 - 1 + b)];
        out.value += (wx[a] * wy[b]) * v;
        out.dx += (dwx[a] * wy[b] * n) * v;
        out.dy += (wx[a] * dwy[b] * n) * v;
      }
    }
    return out;
  }
  double frequency() const override { return grid_.n(); }

 private:
  static void weights(double t, double w[4], double dw[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
    w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
    w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
    w[3] = 0.5 * (t3 - t2);
    dw[0] = 0.5 * (-3.0 * t2 + 4.0 * t - 1.0);
    dw[1] = 0.5 * (9.0 * t2 - 10.0 * t);
    dw[2] = 0.5 * (-9.0 * t2 + 8.0 * t + 1.0);
    dw[3] = 0.5 * (3.0 * t2 - 2.0 * t);
  }

  PeriodicGrid grid_;
  LinearPart linear_;
  std::vector<MinkVector> periodic_;
};

inline std::shared_ptr<const ChartMap> make_interpolating_chart(const Immersion& f) {
  return std::make_shared<InterpolatingChart>(f);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Metric operations

inline MetricField pullback(const Immersion& f) {
  const PeriodicGrid& grid = f.grid();
  std::vector<Sym2> v(grid.size());
  for (int j = 0; j < grid.n(); ++j) {
    for (int i = 0; i < grid.n(); ++i) {
      const auto [tx, ty] = f.node_tangents(i, j);
      v[grid.index(i, j)] = pullback_at(tx, ty);
    }
  }
  return MetricField(grid, std::move(v));
}

/// max over nodes of the spectral norm of a - b.
inline double c0_distance(const MetricField& a, const MetricField& b) {
  a.require_same_grid(b);
  double d = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k) {
    d = std::max(d, (a.values()[k] - b.values()[k]).spectral_norm());
  }
  return d;
}

/// sup over nodes of sqrt(max g2/g1 / min g2/g1); always >= 1.
inline double dilatation_id(const MetricField& g1, const MetricField& g2) {
  g1.require_same_grid(g2);
  double dil = 1.0;
  for (std::size_t k = 0; k < g1.values().size(); ++k) {
    const Sym2& a = g1.values()[k];
    const Sym2& b = g2.values()[k];
    if (!a.is_positive_definite() || !b.is_positive_definite()) {
      throw Error(ErrorCode::NotPositiveDefinite, "dilatation needs positive definite metrics");
    }
    const auto [lo, hi] = pencil_eigenvalues(b, a);
    dil = std::max(dil, std::sqrt(hi / lo));
  }
  return dil;
}

/// Upper bound for the Teichmueller distance between the conformal classes
/// of g1 and g2: (1/2) log Dil(id).
inline double teich_distance_bound(const MetricField& g1, const MetricField& g2) {
  return 0.5 * std::log(dilatation_id(g1, g2));
}

// ---------------------------------------------------------------------------
// CSV export

namespace detail {
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// Header `x,y,E,F,G`, row-major nodes (y slow).
inline void write_metric_csv(std::ostream& os, const MetricField& g) {
  const PeriodicGrid& grid = g.grid();
  os << "x,y,E,F,G\n";
  for (int j = 0; j < grid.n(); ++j) {
    for (int i = 0; i < grid.n(); ++i) {
      const Sym2& s = g.at(i, j);
      os << detail::fmt17(grid.coord(i)) << ',' << detail::fmt17(grid.coord(j)) << ',' << detail::fmt17(s.E)
         << ',' << detail::fmt17(s.F) << ',' << detail::fmt17(s.G) << '\n';
    }
  }
}

inline void write_scalar_csv(std::ostream& os, const ScalarField& f, const std::string& name = "value") {
  const PeriodicGrid& grid = f.grid();
  os << "x,y," << name << '\n';
  for (int j = 0; j < grid.n(); ++j) {
    for (int i = 0; i < grid.n(); ++i) {
      os << detail::fmt17(grid.coord(i)) << ',' << detail::fmt17(grid.coord(j)) << ','
         << detail::fmt17(f.at(i, j)) << '\n';
    }
  }
}

}  // namespace lorentz_ci
