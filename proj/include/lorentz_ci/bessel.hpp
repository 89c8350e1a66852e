#pragma once

// Modified Bessel functions of the first kind as they appear in the
// corrugation loop: I0(a) = int_0^1 cosh(a cos 2 pi s) ds, and the
// Jacobi-Anger coefficients I_k(a) used to integrate the loop over a
// partial period in closed form.

#include <cmath>
#include <numbers>
#include <vector>

#include "lorentz_ci/error.hpp"

namespace lorentz_ci {

namespace detail {
inline constexpr int kMaxSeriesTerms = 600;
}

/// Maclaurin series sum_k (a^2/4)^k / (k!)^2.
inline double bessel_i0(double a) {
  const double q = 0.25 * a * a;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < detail::kMaxSeriesTerms; ++k) {
    term *= q / (double(k) * double(k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

/// I0(a) - 1 without cancellation for small a.
inline double bessel_i0_minus_one(double a) {
  const double q = 0.25 * a * a;
  double term = 1.0;
  double sum = 0.0;
  for (int k = 1; k < detail::kMaxSeriesTerms; ++k) {
    term *= q / (double(k) * double(k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

/// I1(a) = (a/2) sum_k (a^2/4)^k / (k! (k+1)!), the derivative of I0.
inline double bessel_i1(double a) {
  const double q = 0.25 * a * a;
  double term = 0.5 * a;
  double sum = term;
  for (int k = 1; k < detail::kMaxSeriesTerms; ++k) {
    term *= q / (double(k) * double(k + 1));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

/// Unique a >= 0 with I0(a) - 1 = excess. Taking the excess rather than the
/// target keeps small amplitudes accurate (a ~ 2 sqrt(excess)).
/// Bracketing bisection, then Newton polish.
inline double solve_i0_excess(double excess) {
  if (!(excess >= -1e-12)) {
    throw Error(ErrorCode::TargetBelowOne, "I0(a) = target needs target >= 1");
  }
  if (excess <= 0.0) return 0.0;
  if (excess > 1e300) throw Error(ErrorCode::InvalidArgument, "I0 target too large");

  // I0(a) >= 1 + a^2/4 brackets the root from above; I0 overflows past ~713
  double lo = 0.0;
  double hi = std::min(2.0 * std::sqrt(excess), 713.0);
  double a = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = bessel_i0_minus_one(a) - excess;
    if (std::abs(f) <= 1e-15 * (1.0 + excess)) return a;
    if (f > 0.0) hi = a; else lo = a;
    double next = a - f / bessel_i1(a);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo < 1e-16 * std::max(1.0, hi)) return next;
    a = next;
  }
  return a;
}

/// Unique a >= 0 with I0(a) = target; |I0(a) - target| <= 1e-12 * max(1, target).
inline double solve_i0_inverse(double target) { return solve_i0_excess(target - 1.0); }

/// I_0(a) .. I_kmax(a) by Miller's backward recurrence, normalised with
/// e^a = I_0 + 2 sum_{k>=1} I_k.
inline std::vector<double> bessel_i_sequence(double a, int kmax) {
  std::vector<double> out(kmax + 1, 0.0);
  if (a == 0.0) {
    out[0] = 1.0;
    return out;
  }
  const double ax = std::abs(a);
  const int base = std::max(kmax, int(ax) + 1);
  const int start = 2 * ((base + int(std::sqrt(40.0 * base))) / 2) + 20;
  double bip = 0.0;
  double bi = 1.0;
  double norm = 0.0;
  for (int k = start; k > 0; --k) {
    const double bim = bip + (2.0 * k / ax) * bi;
    bip = bi;
    bi = bim;
    if (std::abs(bi) > 1e250) {
      bi *= 1e-250;
      bip *= 1e-250;
      for (auto& v : out) v *= 1e-250;
      norm *= 1e-250;
    }
    // bi now holds the unnormalised I_{k-1}
    if (k - 1 <= kmax) out[k - 1] = bi;
    norm += (k - 1 == 0 ? bi : 2.0 * bi);
  }
  const double scale = std::exp(ax) / norm;
  for (int k = 0; k <= kmax; ++k) {
    out[k] *= scale;
    if (a < 0.0 && (k % 2 == 1)) out[k] = -out[k];
  }
  return out;
}

/// Closed-form partial-period integrals of the corrugation loop,
///   cosh_excess(t) = int_0^t cosh(a cos 2 pi s) ds - I0(a) t
///   sinh_part(t)   = int_0^t sinh(a cos 2 pi s) ds
/// from cosh(a cos phi) = I0 + 2 sum I_2k cos 2k phi and
/// sinh(a cos phi) = 2 sum I_{2k+1} cos (2k+1) phi. Both are 1-periodic in t.
struct LoopWindow {
  double cosh_excess = 0.0;
  double sinh_part = 0.0;
};

class LoopIntegrator {
 public:
  explicit LoopIntegrator(double amplitude) : a_(amplitude) {
    if (a_ == 0.0) return;
    int kmax = int(2.0 * a_) + 24;
    coeffs_ = bessel_i_sequence(a_, kmax);
    // drop the negligible tail
    const double cut = 1e-18 * coeffs_[0];
    while (coeffs_.size() > 2 && std::abs(coeffs_.back()) < cut) coeffs_.pop_back();
  }

  double amplitude() const { return a_; }
  double i0() const { return coeffs_.empty() ? 1.0 : coeffs_[0]; }

  LoopWindow window(double t) const {
    LoopWindow w;
    if (coeffs_.empty()) return w;
    const double phi = 2.0 * std::numbers::pi * t;
    const double c1 = std::cos(phi);
    // sin(m phi) by the Chebyshev recurrence s_{m+1} = 2 cos(phi) s_m - s_{m-1}
    double s_prev = 0.0;
    double s_cur = std::sin(phi);
    const int m_max = int(coeffs_.size()) - 1;
    for (int m = 1; m <= m_max; ++m) {
      const double term = coeffs_[m] * s_cur / (std::numbers::pi * m);
      if (m % 2 == 0) w.cosh_excess += term; else w.sinh_part += term;
      const double s_next = 2.0 * c1 * s_cur - s_prev;
      s_prev = s_cur;
      s_cur = s_next;
    }
    return w;
  }

 private:
  double a_;
  std::vector<double> coeffs_;
};

}  // namespace lorentz_ci
