#pragma once

// Genus-1 Teichmueller layer: Beltrami-type target metrics h_w, the modulus
// of a metric on the square torus, upper-half-plane distance, and the damped
// fixed-point search for a conformal corrugated embedding.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lorentz_ci/corrugation.hpp"
#include "lorentz_ci/defect.hpp"
#include "lorentz_ci/error.hpp"
#include "lorentz_ci/metric_grid.hpp"

namespace lorentz_ci {

using cplx = std::complex<double>;

class UHPoint {
 public:
  UHPoint(double re, double im) : w_(re, im) { check(); }
  explicit UHPoint(cplx w) : w_(w) { check(); }

  cplx value() const { return w_; }
  double re() const { return w_.real(); }
  double im() const { return w_.imag(); }

 private:
  void check() const {
    if (!(w_.imag() > 0.0) || !std::isfinite(w_.real())) {
      throw Error(ErrorCode::InvalidArgument, "point is not in the upper half plane");
    }
  }
  cplx w_;
};

/// mu_w = (i - w)/(i + w), the Beltrami coefficient of the affine map sending
/// the square lattice to <1, w>.
inline cplx mu_of_w(const UHPoint& w) {
  const cplx i(0.0, 1.0);
  return (i - w.value()) / (i + w.value());
}

/// |dz + mu dzbar|^2 = |1+mu|^2 dx^2 + 4 Im(mu) dx dy + |1-mu|^2 dy^2, so F = 2 Im mu.
inline Sym2 beltrami_form(cplx mu) {
  return {std::norm(1.0 + mu), 2.0 * mu.imag(), std::norm(1.0 - mu)};
}

/// g_w = delta * lambda^2 |dz + mu_w dzbar|^2
inline MetricField build_target_metric(const ScalarField& lambda2, const UHPoint& w, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
  if (!(lambda2.min() > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda^2 must be positive");
  const Sym2 b = beltrami_form(mu_of_w(w));
  std::vector<Sym2> v(lambda2.grid().size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = (delta * lambda2.values()[k]) * b;
  return MetricField(lambda2.grid(), std::move(v));
}

/// lambda^2 = sqrt(det f*h), the conformal factor of f*h against |dz|^2 when
/// f*h is conformal to the square torus.
inline ScalarField conformal_factor(const MetricField& g) {
  std::vector<double> v(g.grid().size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::sqrt(g.values()[k].det());
  return ScalarField(g.grid(), std::move(v));
}

/// Upper-half-plane distance arcosh(1 + |w1-w2|^2 / (2 Im w1 Im w2)), in the
/// cancellation-free form 2 asinh(|w1-w2| / (2 sqrt(Im w1 Im w2))).
inline double hyp_distance(const UHPoint& a, const UHPoint& b) {
  return 2.0 * std::asinh(std::abs(a.value() - b.value()) / (2.0 * std::sqrt(a.im() * b.im())));
}

// ---------------------------------------------------------------------------
// Modulus of a torus metric

struct ModulusOptions {
  double tolerance = 1e-10;  ///< relative CG residual
  int max_iter = 0;          ///< 0: 40 n + 2000
};

struct ModulusResult {
  UHPoint w{0.0, 1.0};
  bool flipped = false;  ///< raw period ratio was in the lower half plane
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

/// Per-cell conductivity K = sqrt(det g) g^-1 from the mean of the four corner metrics.
inline std::vector<Sym2> cell_conductivity(const MetricField& g) {
  const PeriodicGrid& grid = g.grid();
  const int n = grid.n();
  std::vector<Sym2> k(grid.size());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Sym2 m = 0.25 * (g.at(i, j) + g.at(i + 1, j) + g.at(i, j + 1) + g.at(i + 1, j + 1));
      k[grid.index(i, j)] = std::sqrt(m.det()) * m.inverse();
    }
  }
  return k;
}

// The four P1 triangles of a cell (both diagonals). Each gradient is a pair of
// corner differences; corners are numbered 0=(i,j) 1=(i+1,j) 2=(i,j+1) 3=(i+1,j+1).
struct TriGrad {
  int xp, xm, yp, ym;  // d/dx ~ a[xp] - a[xm], d/dy ~ a[yp] - a[ym]
};
inline constexpr TriGrad kTriangles[4] = {
    {1, 0, 3, 1},  // (00,10,11)
    {3, 2, 2, 0},  // (00,11,01)
    {1, 0, 2, 0},  // (00,10,01)
    {3, 2, 3, 1},  // (10,11,01)
};

}  // namespace detail

/// Conformal modulus of (T^2, g): the g-harmonic representative theta of
/// [dx] minimises the Dirichlet energy int theta^T K theta over theta = dx +
/// da (P1 elements averaged over both cell diagonals, Jacobi-preconditioned
/// CG with a zero-mean gauge). With the periods of the holomorphic form
/// theta + i *theta,
///   w = i int (K theta)_x / (1 - i int (K theta)_y).
inline ModulusResult solve_modulus(const MetricField& g, const ModulusOptions& opt = {}) {
  if (!g.is_positive_definite()) throw Error(ErrorCode::NotPositiveDefinite, "modulus needs a Riemannian metric");
  const PeriodicGrid& grid = g.grid();
  const int n = grid.n();
  const std::size_t m = grid.size();
  const double h = grid.spacing();
  const std::vector<Sym2> kc = detail::cell_conductivity(g);

  auto corners = [&](int i, int j, std::size_t c[4]) {
    c[0] = grid.index(i, j);
    c[1] = grid.index(i + 1, j);
    c[2] = grid.index(i, j + 1);
    c[3] = grid.index(i + 1, j + 1);
  };

  // energy sum_T (h e + D_T a)^T K (h e + D_T a), e = (1, 0)
  auto apply = [&](const std::vector<double>& a, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    std::size_t c[4];
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        corners(i, j, c);
        const Sym2& K = kc[grid.index(i, j)];
        for (const auto& t : detail::kTriangles) {
          const double gx = a[c[t.xp]] - a[c[t.xm]];
          const double gy = a[c[t.yp]] - a[c[t.ym]];
          const double qx = K.E * gx + K.F * gy;
          const double qy = K.F * gx + K.G * gy;
          out[c[t.xp]] += qx;
          out[c[t.xm]] -= qx;
          out[c[t.yp]] += qy;
          out[c[t.ym]] -= qy;
        }
      }
    }
  };

  std::vector<double> rhs(m, 0.0), diag(m, 0.0);
  {
    std::size_t c[4];
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        corners(i, j, c);
        const Sym2& K = kc[grid.index(i, j)];
        for (const auto& t : detail::kTriangles) {
          const double qx = K.E * h, qy = K.F * h;
          rhs[c[t.xp]] -= qx;
          rhs[c[t.xm]] += qx;
          rhs[c[t.yp]] -= qy;
          rhs[c[t.ym]] += qy;
          // diagonal of D^T K D: each node appears with +-1 in one or both components
          for (std::size_t node : {c[0], c[1], c[2], c[3]}) {
            const double sx = (node == c[t.xp]) - (node == c[t.xm]);
            const double sy = (node == c[t.yp]) - (node == c[t.ym]);
            diag[node] += K.E * sx * sx + 2.0 * K.F * sx * sy + K.G * sy * sy;
          }
        }
      }
    }
  }

  auto project_mean = [&](std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    s /= double(m);
    for (double& x : v) x -= s;
  };

  // preconditioned conjugate gradients on the consistent singular system
  std::vector<double> a(m, 0.0), r = rhs, z(m), p(m), ap(m);
  project_mean(r);
  double rhs_norm = 0.0;
  for (double x : r) rhs_norm += x * x;
  rhs_norm = std::sqrt(rhs_norm);
  ModulusResult res;
  const int max_iter = opt.max_iter > 0 ? opt.max_iter : 40 * n + 2000;
  if (rhs_norm > 0.0) {
    for (std::size_t k = 0; k < m; ++k) z[k] = r[k] / diag[k];
    project_mean(z);
    p = z;
    double rz = 0.0;
    for (std::size_t k = 0; k < m; ++k) rz += r[k] * z[k];
    int it = 0;
    double rn = rhs_norm;
    for (; it < max_iter; ++it) {
      apply(p, ap);
      double pap = 0.0;
      for (std::size_t k = 0; k < m; ++k) pap += p[k] * ap[k];
      if (!(pap > 0.0) || !std::isfinite(pap)) break;
      const double step = rz / pap;
      rn = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        a[k] += step * p[k];
        r[k] -= step * ap[k];
        rn += r[k] * r[k];
      }
      rn = std::sqrt(rn);
      if (rn <= opt.tolerance * rhs_norm) break;
      for (std::size_t k = 0; k < m; ++k) z[k] = r[k] / diag[k];
      project_mean(z);
      double rz_new = 0.0;
      for (std::size_t k = 0; k < m; ++k) rz_new += r[k] * z[k];
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t k = 0; k < m; ++k) p[k] = z[k] + beta * p[k];
    }
    res.iterations = it;
    res.residual = rn / rhs_norm;
    if (!(res.residual <= opt.tolerance) || !std::isfinite(res.residual)) {
      throw Error(ErrorCode::SolverDiverged,
                  "modulus CG stopped at relative residual " + std::to_string(res.residual));
    }
    project_mean(a);
  }

  // int K theta over the torus; each triangle has area h^2/2 and each
  // triangulation covers the torus once, hence the weight h^2/4.
  double fx = 0.0, fy = 0.0;
  std::size_t c[4];
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      corners(i, j, c);
      const Sym2& K = kc[grid.index(i, j)];
      for (const auto& t : detail::kTriangles) {
        const double tx = 1.0 + (a[c[t.xp]] - a[c[t.xm]]) / h;
        const double ty = (a[c[t.yp]] - a[c[t.ym]]) / h;
        fx += K.E * tx + K.F * ty;
        fy += K.F * tx + K.G * ty;
      }
    }
  }
  fx *= 0.25 * h * h;
  fy *= 0.25 * h * h;
  cplx w = cplx(0.0, fx) / cplx(1.0, -fy);
  if (w.imag() < 0.0) {
    w = std::conj(w);
    res.flipped = true;
  }
  res.w = UHPoint(w);
  return res;
}

inline UHPoint torus_modulus(const MetricField& g) { return solve_modulus(g).w; }

// ---------------------------------------------------------------------------
// Choice of the longness scale delta

/// Boundary samples of the hyperbolic disc B_rho(w0): Euclidean centre
/// Re w0 + i Im w0 cosh rho, radius Im w0 sinh rho. The phase offset is fixed
/// so that runs are reproducible.
inline std::vector<UHPoint> hyperbolic_circle(const UHPoint& w0, double rho, int count, double phase = 0.0) {
  std::vector<UHPoint> out;
  const double cy = w0.im() * std::cosh(rho), rad = w0.im() * std::sinh(rho);
  for (int k = 0; k < count; ++k) {
    const double t = phase + 2.0 * std::numbers::pi * k / count;
    out.emplace_back(w0.re() + rad * std::cos(t), cy + rad * std::sin(t));
  }
  return out;
}

/// f*h - g_w lies strictly inside the span of the dictionary and is positive definite.
inline bool long_for(const MetricField& fh, const ScalarField& lambda2, const UHPoint& w, double delta) {
  const MetricField d = fh - build_target_metric(lambda2, w, delta);
  return cone_margin(d) > 0.0 && d.is_positive_definite();
}

inline constexpr double kDeltaSamplePhase = 0.123456789;

/// Largest delta = 2^-k making f long for every g_w on 32 boundary samples of
/// B_rho(w0) and its centre, halved for safety.
inline double choose_delta(const Immersion& f, const UHPoint& w0, double rho) {
  const MetricField fh = pullback(f);
  const ScalarField lambda2 = conformal_factor(fh);
  std::vector<UHPoint> samples{w0};
  if (rho > 0.0) {
    const auto ring = hyperbolic_circle(w0, rho, 32, kDeltaSamplePhase);
    samples.insert(samples.end(), ring.begin(), ring.end());
  }
  for (int k = 0; k <= 40; ++k) {
    const double delta = std::ldexp(1.0, -k);
    const bool ok = std::all_of(samples.begin(), samples.end(),
                                [&](const UHPoint& w) { return long_for(fh, lambda2, w, delta); });
    if (ok) return 0.5 * delta;
  }
  throw Error(ErrorCode::NoAdmissibleDelta, "no admissible delta above 2^-40");
}

/// Re-checks a delta on a finer ring of `count` boundary points.
inline bool verify_delta(const Immersion& f, const UHPoint& w0, double rho, double delta, int count = 128) {
  const MetricField fh = pullback(f);
  const ScalarField lambda2 = conformal_factor(fh);
  if (!long_for(fh, lambda2, w0, delta)) return false;
  if (rho == 0.0) return true;
  for (const auto& w : hyperbolic_circle(w0, rho, count, 0.5 / count)) {
    if (!long_for(fh, lambda2, w, delta)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Conformal search

struct SearchConfig {
  double rho = 0.1;
  double epsilon = 0.05;  ///< epsilon-isometry budget for the automatic N choice
  double delta = 0.0;     ///< 0: choose_delta
  double damping = 1.0;
  int max_iter = 12;
  double tol = 1e-2;
  int max_evals = 25;
  int probe_grid = 32;  ///< grid for the automatic corrugation-number probes
  std::vector<int> n_corr;  ///< explicit numbers per dictionary term; empty: automatic

  void validate() const {
    if (!(rho >= 0.0) || !(epsilon > 0.0) || !(delta >= 0.0) || !(damping > 0.0 && damping <= 1.0) ||
        max_iter < 1 || !(tol > 0.0) || max_evals < 1 || probe_grid < 8) {
      throw Error(ErrorCode::ConfigError, "invalid search configuration");
    }
  }
};

struct SearchTraceRow {
  int iter = 0;
  UHPoint w{0.0, 1.0};
  UHPoint g{0.0, 1.0};
  double hyp_dist = 0.0;  ///< hyp_distance(G(w), w0)
  double c0_err = 0.0;    ///< c0 distance of pullback(F_w) to g_w
  double dil_bound = 0.0; ///< (1/2) log Dil(g_w, pullback(F_w))
  double modulus_shift = 0.0;  ///< hyp_distance(G(w), w)
  bool flipped = false;
  std::string phase = "damped";
};

struct SearchResult {
  UHPoint w_star{0.0, 1.0};
  UHPoint g_star{0.0, 1.0};
  double distance = 0.0;
  double delta = 0.0;
  std::vector<int> n_corr;
  std::vector<SearchTraceRow> trace;
  int evaluations = 0;
  int hypothesis_warnings = 0;  ///< evaluations with hyp_distance(G(w), w) > rho
  std::shared_ptr<const Immersion> immersion;
};

class SearchFailure : public Error {
 public:
  SearchFailure(const std::string& msg, std::vector<SearchTraceRow> trace)
      : Error(ErrorCode::SearchFailed, msg), trace_(std::move(trace)) {}
  const std::vector<SearchTraceRow>& trace() const { return trace_; }

 private:
  std::vector<SearchTraceRow> trace_;
};

/// One evaluation of G: corrugate f towards g_w and measure the modulus.
struct GEvaluation {
  Immersion immersion;
  MetricField target;
  MetricField induced;
  ModulusResult modulus;
};

inline GEvaluation evaluate_g(const Immersion& f, const UHPoint& w, double delta, const NPolicy& policy) {
  const MetricField fh = pullback(f);
  const ScalarField lambda2 = conformal_factor(fh);
  MetricField target = build_target_metric(lambda2, w, delta);
  PipelineResult run = run_pipeline(f, decompose(fh - target), policy);
  MetricField induced = pullback(run.immersion);
  ModulusResult mod = solve_modulus(induced);
  return {std::move(run.immersion), std::move(target), std::move(induced), mod};
}

/// Uniform corrugation numbers: the elementwise maximum of automatic runs at
/// w0 and at the two boundary points of B_rho(w0) with extreme Im mu (these
/// switch on the two diagonal forms), on a coarse copy of f.
inline std::vector<int> uniform_corrugation_numbers(const Immersion& f, const UHPoint& w0, double rho, double delta,
                                                    double epsilon, int probe_grid) {
  const PeriodicGrid coarse(probe_grid);
  const Immersion fc = f.derivative_mode() == DerivativeMode::AnalyticJacobian
                           ? Immersion::analytic(coarse, f.linear_part(), f.chart_ptr())
                           : f;
  std::vector<UHPoint> probes{w0};
  if (rho > 0.0) {
    const auto ring = hyperbolic_circle(w0, rho, 64);
    auto by_mu = [](const UHPoint& a, const UHPoint& b) { return mu_of_w(a).imag() < mu_of_w(b).imag(); };
    probes.push_back(*std::max_element(ring.begin(), ring.end(), by_mu));
    probes.push_back(*std::min_element(ring.begin(), ring.end(), by_mu));
  }
  std::vector<int> n;
  for (const auto& w : probes) {
    const MetricField fh = pullback(fc);
    const MetricField target = build_target_metric(conformal_factor(fh), w, delta);
    const auto run = run_pipeline(fc, decompose(fh - target), NPolicy::automatic(epsilon));
    if (n.empty()) n.assign(run.n_corr.size(), 1);
    for (std::size_t k = 0; k < n.size(); ++k) n[k] = std::max(n[k], std::max(run.n_corr[k], 1));
  }
  return n;
}

/// Damped fixed-point iteration w <- w + damping (w0 - G(w)), with a 3x3
/// grid refinement around the best point when the iteration stalls.
inline SearchResult conformal_search(const Immersion& f, const UHPoint& w0, const SearchConfig& cfg) {
  cfg.validate();
  SearchResult res;
  res.delta = cfg.delta > 0.0 ? cfg.delta : choose_delta(f, w0, cfg.rho);
  res.n_corr = cfg.n_corr.empty()
                   ? uniform_corrugation_numbers(f, w0, cfg.rho, res.delta, cfg.epsilon, cfg.probe_grid)
                   : cfg.n_corr;
  const NPolicy policy = NPolicy::fixed(res.n_corr);

  double best = INFINITY;
  std::shared_ptr<const Immersion> best_f;
  UHPoint best_w = w0, best_g = w0;

  auto eval = [&](const UHPoint& w, int iter, const char* phase) {
    ++res.evaluations;
    SearchTraceRow row;
    row.iter = iter;
    row.w = w;
    std::optional<GEvaluation> got;
    try {
      got.emplace(evaluate_g(f, w, res.delta, policy));
    } catch (const Error& e) {
      // w too far from w0 for this delta or these corrugation numbers
      if (e.code() != ErrorCode::DefectOutsideCone && e.code() != ErrorCode::MetricNotRiemannian &&
          e.code() != ErrorCode::IntermediateMetricNotRiemannian && e.code() != ErrorCode::NotSpacelike &&
          e.code() != ErrorCode::NotPositiveDefinite) {
        throw;
      }
      row.g = w;
      row.hyp_dist = INFINITY;
      row.c0_err = INFINITY;
      row.dil_bound = INFINITY;
      row.phase = "rejected";
      res.trace.push_back(row);
      return row;
    }
    GEvaluation& ge = *got;
    row.g = ge.modulus.w;
    row.flipped = ge.modulus.flipped;
    row.hyp_dist = hyp_distance(ge.modulus.w, w0);
    row.c0_err = c0_distance(ge.induced, ge.target);
    row.dil_bound = 0.5 * std::log(dilatation_id(ge.target, ge.induced));
    row.modulus_shift = hyp_distance(ge.modulus.w, w);
    row.phase = phase;
    if (row.modulus_shift > cfg.rho) ++res.hypothesis_warnings;
    res.trace.push_back(row);
    if (row.hyp_dist < best) {
      best = row.hyp_dist;
      best_w = w;
      best_g = ge.modulus.w;
      best_f = std::make_shared<const Immersion>(std::move(ge.immersion));
    }
    return row;
  };

  auto finish = [&]() {
    res.w_star = best_w;
    res.g_star = best_g;
    res.distance = best;
    res.immersion = best_f;
    return res;
  };

  // damped iteration
  UHPoint w = w0;
  double prev = INFINITY;
  int stalls = 0;
  for (int it = 0; it < cfg.max_iter && res.evaluations < cfg.max_evals; ++it) {
    const SearchTraceRow row = eval(w, it, "damped");
    if (row.hyp_dist <= cfg.tol) return finish();
    stalls = row.hyp_dist > 0.9 * prev ? stalls + 1 : 0;
    if (stalls >= 2) break;
    prev = row.hyp_dist;
    const cplx next = w.value() + cfg.damping * (w0.value() - row.g.value());
    if (!(next.imag() > 0.0)) break;
    w = UHPoint(next);
  }

  // grid refinement around the best point
  double step = 0.25 * cfg.rho * w0.im();
  int iter = int(res.trace.size());
  while (res.evaluations < cfg.max_evals && best > cfg.tol && step > 1e-9) {
    const UHPoint centre = best_w;
    bool improved = false;
    for (int dj = -1; dj <= 1 && res.evaluations < cfg.max_evals; ++dj) {
      for (int di = -1; di <= 1 && res.evaluations < cfg.max_evals; ++di) {
        if (di == 0 && dj == 0) continue;
        const cplx c = centre.value() + cplx(di * step, dj * step);
        if (!(c.imag() > 0.0)) continue;
        const double before = best;
        eval(UHPoint(c), iter++, "grid");
        if (best < before) improved = true;
        if (best <= cfg.tol) return finish();
      }
    }
    if (!improved) step *= 0.5;
  }

  if (best <= cfg.tol) return finish();
  std::string msg = "no w with hyp_distance(G(w), w0) <= tol after " + std::to_string(res.evaluations) +
                    " evaluations (best " + std::to_string(best) + ")";
  throw SearchFailure(msg, res.trace);
}

/// Header `iter,re_w,im_w,re_G,im_G,hyp_dist,c0_err`.
inline void write_search_trace_csv(std::ostream& os, const std::vector<SearchTraceRow>& trace) {
  os << "iter,re_w,im_w,re_G,im_G,hyp_dist,c0_err\n";
  for (const auto& r : trace) {
    os << r.iter << ',' << detail::fmt17(r.w.re()) << ',' << detail::fmt17(r.w.im()) << ','
       << detail::fmt17(r.g.re()) << ',' << detail::fmt17(r.g.im()) << ',' << detail::fmt17(r.hyp_dist) << ','
       << detail::fmt17(r.c0_err) << '\n';
  }
}

}  // namespace lorentz_ci
