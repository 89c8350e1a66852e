#pragma once

// Splitting a positive semidefinite defect field into squares of integer
// linear forms: Delta = sum_j eta_j l_j (x) l_j with eta_j >= 0.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>
#include <vector>

#include "lorentz_ci/error.hpp"
#include "lorentz_ci/metric_grid.hpp"

namespace lorentz_ci {

/// l = a dx + b dy with gcd(|a|,|b|) = 1, so ker l contains the primitive
/// lattice vector (-b, a) and corrugations along l descend to the torus.
class LinearFormZ {
 public:
  LinearFormZ(long a, long b) : a_(a), b_(b) {
    if (a == 0 && b == 0) throw Error(ErrorCode::InvalidArgument, "linear form must be nonzero");
    if (std::gcd(std::labs(a), std::labs(b)) != 1) {
      throw Error(ErrorCode::InvalidArgument,
                  "linear form (" + std::to_string(a) + "," + std::to_string(b) + ") is not primitive");
    }
  }

  long a() const { return a_; }
  long b() const { return b_; }
  double operator()(double x, double y) const { return double(a_) * x + double(b_) * y; }
  /// Primitive integer vector spanning the kernel.
  std::pair<long, long> kernel() const { return {-b_, a_}; }
  Sym2 square() const { return form_square(double(a_), double(b_)); }

  bool operator==(const LinearFormZ& o) const { return a_ == o.a_ && b_ == o.b_; }

 private:
  long a_;
  long b_;
};

inline std::vector<LinearFormZ> default_dictionary() {
  return {LinearFormZ(1, 0), LinearFormZ(0, 1), LinearFormZ(1, 1), LinearFormZ(1, -1)};
}

struct DecompositionTerm {
  LinearFormZ form;
  ScalarField eta;
};

struct Decomposition {
  std::vector<DecompositionTerm> terms;

  /// sum_j eta_j l_j (x) l_j on the given grid.
  MetricField reconstruct(const PeriodicGrid& grid) const {
    MetricField acc(grid, Sym2{});
    for (const auto& t : terms) acc = acc + weighted_form_square(t.eta, double(t.form.a()), double(t.form.b()));
    return acc;
  }
};

namespace detail {
inline bool dictionary_has(const std::vector<LinearFormZ>& dict, long a, long b) {
  return std::any_of(dict.begin(), dict.end(), [&](const LinearFormZ& l) {
    return (l.a() == a && l.b() == b) || (l.a() == -a && l.b() == -b);
  });
}
}  // namespace detail

constexpr double kDefectConeTolerance = 1e-12;

/// Closed-form split on the four forms dx, dy, dx+dy, dx-dy. Additional
/// dictionary forms receive zero coefficients. Terms come out in dictionary order.
inline Decomposition decompose(const MetricField& delta,
                               const std::vector<LinearFormZ>& dictionary = default_dictionary()) {
  for (auto [a, b] : {std::pair<long, long>{1, 0}, {0, 1}, {1, 1}, {1, -1}}) {
    if (!detail::dictionary_has(dictionary, a, b)) {
      throw Error(ErrorCode::InvalidArgument, "dictionary must contain dx, dy, dx+dy and dx-dy");
    }
  }
  const PeriodicGrid& grid = delta.grid();
  const std::size_t m = grid.size();
  std::vector<double> ex(m), ey(m), ep(m), em(m);
  for (std::size_t k = 0; k < m; ++k) {
    const Sym2& d = delta.values()[k];
    const double af = std::abs(d.F);
    const double se = d.E - af, sg = d.G - af;
    if (se < -kDefectConeTolerance || sg < -kDefectConeTolerance) {
      throw Error(ErrorCode::DefectOutsideCone, "defect leaves the span of the dictionary at node " +
                                                    std::to_string(k % grid.n()) + "," +
                                                    std::to_string(k / grid.n()));
    }
    ex[k] = std::max(se, 0.0);
    ey[k] = std::max(sg, 0.0);
    ep[k] = std::max(d.F, 0.0);
    em[k] = std::max(-d.F, 0.0);
  }

  Decomposition out;
  bool used[4] = {false, false, false, false};
  for (const auto& l : dictionary) {
    // (a,b) and (-a,-b) have the same square; the first occurrence wins.
    const long a = l.a() < 0 || (l.a() == 0 && l.b() < 0) ? -l.a() : l.a();
    const long b = l.a() < 0 || (l.a() == 0 && l.b() < 0) ? -l.b() : l.b();
    int slot = -1;
    if (a == 1 && b == 0) slot = 0;
    else if (a == 0 && b == 1) slot = 1;
    else if (a == 1 && b == 1) slot = 2;
    else if (a == 1 && b == -1) slot = 3;
    if (slot >= 0 && !used[slot]) {
      used[slot] = true;
      const std::vector<double>* src[4] = {&ex, &ey, &ep, &em};
      out.terms.push_back({l, ScalarField(grid, *src[slot])});
    } else {
      out.terms.push_back({l, ScalarField(grid, 0.0)});
    }
  }
  return out;
}

/// min over nodes of min(E - |F|, G - |F|).
inline double cone_margin(const MetricField& delta) {
  double m = INFINITY;
  for (const auto& d : delta.values()) {
    const double af = std::abs(d.F);
    m = std::min({m, d.E - af, d.G - af});
  }
  return m;
}

inline double cone_margin(const MetricField& delta, const std::vector<LinearFormZ>&) { return cone_margin(delta); }

}  // namespace lorentz_ci
