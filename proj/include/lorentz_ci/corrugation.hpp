#pragma once

// The corrugation process on the torus:
//   F(p) = f(p) + (1/N) Gamma(p, N l(p)),
//   Gamma(p, t) = int_0^t (gamma(p,s) - gamma_bar(p)) ds,
//   gamma(p,s)  = r (cosh(theta) u + sinh(theta) n),  theta = alpha cos(2 pi s).
// Gamma has the closed form r (cosh_excess(t) u + sinh_part(t) n), see bessel.hpp.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "lorentz_ci/bessel.hpp"
#include "lorentz_ci/defect.hpp"
#include "lorentz_ci/error.hpp"
#include "lorentz_ci/metric_grid.hpp"
#include "lorentz_ci/minkowski.hpp"

namespace lorentz_ci {

struct CorrugationStep {
  LinearFormZ form;
  ScalarField eta;
  int n_corr = 1;

  CorrugationStep(LinearFormZ form_, ScalarField eta_, int n_corr_)
      : form(form_), eta(std::move(eta_)), n_corr(n_corr_) {
    if (n_corr < 1) throw Error(ErrorCode::InvalidArgument, "corrugation number must be >= 1");
    if (eta.min() < 0.0) throw Error(ErrorCode::InvalidArgument, "corrugation coefficient must be >= 0");
  }
};

struct FramePoint {
  MinkVector v;
  MinkVector u;
  MinkVector n;
  double dpi_u = 0.0;
  double r = 0.0;
  double alpha = 0.0;
};

/// Frame adapted to l at a point with tangents tx = df(d/dx), ty = df(d/dy):
/// v spans df(ker l), u = df(w) with w the unit g-normal to ker l, l(w) > 0.
inline FramePoint frame_at(const MinkVector& tx, const MinkVector& ty, const LinearFormZ& form) {
  const Sym2 g = pullback_at(tx, ty);
  if (!g.is_positive_definite()) throw Error(ErrorCode::NotSpacelike, "immersion is not spacelike");
  const double a = double(form.a()), b = double(form.b());
  FramePoint fr;
  const double kx = -b, ky = a;
  const double kn = 1.0 / std::sqrt(g.eval(kx, ky));
  fr.v = (kx * kn) * tx + (ky * kn) * ty;
  const Sym2 gi = g.inverse();
  const double wx = gi.E * a + gi.F * b;
  const double wy = gi.F * a + gi.G * b;
  fr.dpi_u = std::sqrt(a * wx + b * wy);
  fr.u = (wx / fr.dpi_u) * tx + (wy / fr.dpi_u) * ty;
  try {
    fr.n = timelike_unit_normal(tx, ty);
  } catch (const Error&) {
    throw Error(ErrorCode::NotSpacelike, "tangent plane is degenerate");
  }
  return fr;
}

/// Fills r and alpha: r^2 = 1/dpi_u^2 - eta, I0(alpha) = 1/(r dpi_u).
/// With q = eta dpi_u^2 the target is 1/sqrt(1-q); its excess over 1 is
/// formed without cancellation so that eta = 0 gives alpha = 0 exactly.
inline void solve_amplitudes(FramePoint& fr, double eta) {
  const double q = eta * fr.dpi_u * fr.dpi_u;
  if (!(q < 1.0)) throw Error(ErrorCode::MetricNotRiemannian, "f*h - eta l(x)l is not Riemannian");
  const double s = std::sqrt(1.0 - q);
  fr.r = s / fr.dpi_u;
  fr.alpha = solve_i0_excess(q / (s * (1.0 + s)));
}

inline std::vector<FramePoint> adapted_frame(const Immersion& f, const LinearFormZ& form) {
  const PeriodicGrid& grid = f.grid();
  std::vector<FramePoint> out(grid.size());
  for (int j = 0; j < grid.n(); ++j) {
    for (int i = 0; i < grid.n(); ++i) {
      const auto [tx, ty] = f.node_tangents(i, j);
      out[grid.index(i, j)] = frame_at(tx, ty, form);
    }
  }
  return out;
}

inline std::vector<FramePoint> solve_amplitudes(std::vector<FramePoint> frames, const ScalarField& eta) {
  if (frames.size() != eta.grid().size()) throw Error(ErrorCode::GridMismatch, "frames and eta differ in size");
  for (std::size_t k = 0; k < frames.size(); ++k) solve_amplitudes(frames[k], eta.values()[k]);
  return frames;
}

/// gamma(s) at the phase s of one loop.
inline MinkVector loop_point(const FramePoint& fr, double s) {
  const double th = fr.alpha * std::cos(2.0 * std::numbers::pi * s);
  return fr.r * (std::cosh(th) * fr.u + std::sinh(th) * fr.n);
}

namespace detail {

/// Frame, amplitudes and loop coefficients at one parameter point.
struct LocalLoop {
  FramePoint frame;
  LoopIntegrator loop;

  MinkVector gamma_window(double t) const {
    const LoopWindow w = loop.window(t);
    return frame.r * (w.cosh_excess * frame.u + w.sinh_part * frame.n);
  }
  MinkVector gamma_minus_mean(double s) const {
    return loop_point(frame, s) - (frame.r * loop.i0()) * frame.u;
  }
};

inline LocalLoop local_loop(const MinkVector& tx, const MinkVector& ty, const LinearFormZ& form, double eta) {
  FramePoint fr = frame_at(tx, ty, form);
  solve_amplitudes(fr, eta);
  return {fr, LoopIntegrator(fr.alpha)};
}

inline double frac(double t) { return t - std::floor(t); }

}  // namespace detail

/// The corrugated map as a chart over the previous one. Derivatives are the
/// exact chain rule dF = df + (gamma - gamma_bar) (x) l + (1/N) d_p Gamma,
/// where only the slow p-dependence d_p Gamma (frames and amplitudes, at
/// fixed phase) is taken by a central difference.
class CorrugatedChart final : public ChartMap {
 public:
  CorrugatedChart(std::shared_ptr<const ChartMap> prev, CorrugationStep step)
      : prev_(std::move(prev)), step_(std::move(step)) {
    const double l = std::hypot(double(step_.form.a()), double(step_.form.b()));
    frequency_ = std::max(prev_->frequency(), step_.n_corr * l);
    // the frame oscillates with the previous stage's frequency
    h_ = 1e-3 / (2.0 * std::numbers::pi * std::max(prev_->frequency(), 1.0));
    eta_const_ = step_.eta.is_constant() ? std::optional<double>(step_.eta.values()[0]) : std::nullopt;
  }

  Jet jet(double x, double y) const override {
    return assemble(prev_->jet(x, y), x, y, detail::frac(step_.n_corr * step_.form(x, y)));
  }

  Jet node_jet(int i, int j, int n) const override {
    // exact phase: N (a i + b j) / n reduced mod 1 in integers
    const long long num = (long long)step_.n_corr * (step_.form.a() * (long long)i + step_.form.b() * (long long)j);
    long long rem = num % n;
    if (rem < 0) rem += n;
    return assemble(prev_->node_jet(i, j, n), double(i) / n, double(j) / n, double(rem) / n);
  }

  double frequency() const override { return frequency_; }
  const CorrugationStep& step() const { return step_; }

 private:
  // the cubic interpolant may undershoot near zeros of eta
  double eta_at(double x, double y) const {
    return eta_const_ ? *eta_const_ : std::max(0.0, step_.eta.sample(x, y));
  }

  detail::LocalLoop loop_at(double x, double y) const {
    const Jet pj = prev_->jet(x, y);
    return detail::local_loop(pj.dx, pj.dy, step_.form, eta_at(x, y));
  }

  Jet assemble(const Jet& pj, double x, double y, double t) const {
    const double inv_n = 1.0 / step_.n_corr;
    const detail::LocalLoop here = detail::local_loop(pj.dx, pj.dy, step_.form, eta_at(x, y));
    Jet out = pj;
    out.value += inv_n * here.gamma_window(t);
    const MinkVector osc = here.gamma_minus_mean(t);
    out.dx += double(step_.form.a()) * osc;
    out.dy += double(step_.form.b()) * osc;
    if (here.frame.alpha == 0.0 && eta_const_ && *eta_const_ == 0.0) return out;
    const double s = inv_n / (2.0 * h_);
    out.dx += s * (loop_at(x + h_, y).gamma_window(t) - loop_at(x - h_, y).gamma_window(t));
    out.dy += s * (loop_at(x, y + h_).gamma_window(t) - loop_at(x, y - h_).gamma_window(t));
    return out;
  }

  std::shared_ptr<const ChartMap> prev_;
  CorrugationStep step_;
  double frequency_ = 1.0;
  double h_ = 1e-4;
  std::optional<double> eta_const_;
};

/// One corrugation. The result keeps the linear part of f: since N l(e_k) is
/// an integer, Gamma(p + e_k, N l(p + e_k)) = Gamma(p, N l(p)).
inline Immersion corrugate_once(const Immersion& f, const CorrugationStep& step) {
  if (step.eta.grid() != f.grid()) throw Error(ErrorCode::GridMismatch, "eta and immersion grids differ");
  // validates the amplitude equations on every node before building anything
  solve_amplitudes(adapted_frame(f, step.form), step.eta);
  auto chart = std::make_shared<CorrugatedChart>(f.chart_ptr(), step);
  return Immersion::analytic(f.grid(), f.linear_part(), chart);
}

/// mu = f*h - eta l (x) l
inline MetricField target_metric(const Immersion& f, const CorrugationStep& step) {
  return pullback(f) - weighted_form_square(step.eta, double(step.form.a()), double(step.form.b()));
}

/// c0 distance between L*h and mu for L = df + (gamma(N l) - u/dpi_u) (x) l.
inline double target_differential_check(const Immersion& f, const CorrugationStep& step) {
  const PeriodicGrid& grid = f.grid();
  const int n = grid.n();
  std::vector<Sym2> lh(grid.size());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const auto [tx, ty] = f.node_tangents(i, j);
      FramePoint fr = frame_at(tx, ty, step.form);
      solve_amplitudes(fr, step.eta.at(i, j));
      const long long num = (long long)step.n_corr * (step.form.a() * (long long)i + step.form.b() * (long long)j);
      long long rem = num % n;
      if (rem < 0) rem += n;
      const MinkVector osc = loop_point(fr, double(rem) / n) - fr.u / fr.dpi_u;
      lh[grid.index(i, j)] = pullback_at(tx + double(step.form.a()) * osc, ty + double(step.form.b()) * osc);
    }
  }
  return c0_distance(MetricField(grid, std::move(lh)), target_metric(f, step));
}

// ---------------------------------------------------------------------------
// Staged pipeline

struct StageLog {
  int index = 0;
  long form_a = 0;
  long form_b = 0;
  int n_corr = 0;
  bool skipped = false;  ///< eta identically zero: the stage is the identity
  double c0_error = 0.0;  ///< c0 distance of the stage pullback to its mu
};

struct PipelineResult {
  Immersion immersion;
  std::vector<StageLog> log;
  std::vector<int> n_corr;
};

/// Corrugation-number policy: explicit numbers per term, or automatic search
/// N -> 2N + 1 (odd, so the phase N l never aliases to a single grid phase)
/// until each stage error is below epsilon / #nonzero terms. A stage's error
/// constant grows with the previous stage's frequency, so each search starts
/// from the previous stage's N.
struct NPolicy {
  std::vector<int> explicit_n;
  double epsilon = 0.05;
  int n_max = (1 << 26) - 1;

  static NPolicy fixed(std::vector<int> n) {
    NPolicy p;
    p.explicit_n = std::move(n);
    return p;
  }
  static NPolicy automatic(double epsilon, int n_max = (1 << 26) - 1) {
    NPolicy p;
    p.epsilon = epsilon;
    p.n_max = n_max;
    return p;
  }
  bool is_automatic() const { return explicit_n.empty(); }
};

inline int next_corrugation_number(int n) { return 2 * n + 1; }

inline PipelineResult run_pipeline(const Immersion& f0, const Decomposition& dec, const NPolicy& policy) {
  const std::size_t m = dec.terms.size();
  if (!policy.is_automatic() && policy.explicit_n.size() != m) {
    throw Error(ErrorCode::InvalidArgument, "need one corrugation number per term");
  }
  std::size_t active = 0;
  for (const auto& t : dec.terms) active += t.eta.is_zero() ? 0 : 1;
  const double budget = policy.epsilon / double(std::max<std::size_t>(active, 1));

  PipelineResult res{f0, {}, {}};
  int last_n = 1;
  for (std::size_t j = 0; j < m; ++j) {
    const auto& term = dec.terms[j];
    StageLog log;
    log.index = int(j);
    log.form_a = term.form.a();
    log.form_b = term.form.b();
    if (term.eta.is_zero()) {
      log.skipped = true;
      log.n_corr = policy.is_automatic() ? 0 : policy.explicit_n[j];
      res.log.push_back(log);
      res.n_corr.push_back(log.n_corr);
      continue;
    }
    const MetricField mu = pullback(res.immersion) -
                           weighted_form_square(term.eta, double(term.form.a()), double(term.form.b()));
    if (!mu.is_positive_definite()) {
      throw Error(ErrorCode::IntermediateMetricNotRiemannian,
                  "stage " + std::to_string(j) + ": intermediate metric is not Riemannian");
    }
    int n = policy.is_automatic() ? last_n : policy.explicit_n[j];
    for (;;) {
      Immersion next = corrugate_once(res.immersion, CorrugationStep(term.form, term.eta, n));
      const double err = c0_distance(pullback(next), mu);
      if (!policy.is_automatic() || err <= budget) {
        log.n_corr = n;
        log.c0_error = err;
        last_n = n;
        res.immersion = std::move(next);
        break;
      }
      if (next_corrugation_number(n) > policy.n_max) {
        throw Error(ErrorCode::CorrugationBudgetExceeded,
                    "stage " + std::to_string(j) + ": error " + std::to_string(err) + " above budget at N=" +
                        std::to_string(n));
      }
      n = next_corrugation_number(n);
    }
    res.log.push_back(log);
    res.n_corr.push_back(log.n_corr);
  }
  return res;
}

inline PipelineResult run_pipeline(const Immersion& f0, const Decomposition& dec, const std::vector<int>& n_corr) {
  return run_pipeline(f0, dec, NPolicy::fixed(n_corr));
}

}  // namespace lorentz_ci
