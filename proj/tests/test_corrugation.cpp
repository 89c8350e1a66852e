#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "lorentz_ci/corrugation.hpp"

using namespace lorentz_ci;

namespace {

Immersion tilted_plane(PeriodicGrid grid, double a) {
  auto chart = std::make_shared<FunctionChart>([a](double x, double y) {
    return Jet{{x, y, a * x}, {1, 0, a}, {0, 1, 0}};
  });
  return Immersion::analytic(grid, LinearPart{{1, 0, a}, {0, 1, 0}}, chart);
}

// A curved spacelike torus: small periodic bumps in the timelike direction.
Immersion bumpy(PeriodicGrid grid, double c) {
  auto chart = std::make_shared<FunctionChart>([c](double x, double y) {
    const double sx = std::sin(2 * M_PI * x), cx = std::cos(2 * M_PI * x);
    const double sy = std::sin(2 * M_PI * y), cy = std::cos(2 * M_PI * y);
    const double k = 2 * M_PI * c;
    return Jet{{x, y, c * sx * cy}, {1, 0, k * cx * cy}, {0, 1, -k * sx * sy}};
  });
  return Immersion::analytic(grid, LinearPart{}, chart);
}

// Gram-Schmidt oracle for the adapted frame, written independently of frame_at.
struct OracleFrame {
  MinkVector u, v, n;
  double dpi_u;
};

OracleFrame oracle_frame(const MinkVector& tx, const MinkVector& ty, long a, long b) {
  auto dfv = [&](double p, double q) { return p * tx + q * ty; };
  // kernel direction, then the other unit vector in the pullback metric
  const MinkVector kv = dfv(-double(b), double(a));
  const MinkVector v = kv / std::sqrt(lorentz_dot(kv, kv));
  // pick any parameter vector with l > 0 and orthogonalise against v
  const double px = double(a), py = double(b);
  MinkVector w = dfv(px, py);
  w = w - lorentz_dot(w, v) * v;
  const double wn = std::sqrt(lorentz_dot(w, w));
  // l(w) / |w| for the parameter vector of w: l(px,py) = a^2 + b^2; the v-part has l = 0
  const double dpi = (px * a + py * b) / wn;
  OracleFrame fr{w / wn, v, {}, dpi};
  // normal from solving the 2x3 orthogonality system by cofactors
  MinkVector n{tx.y * ty.z - tx.z * ty.y, tx.z * ty.x - tx.x * ty.z, -(tx.x * ty.y - tx.y * ty.x)};
  n = n / std::sqrt(-lorentz_dot(n, n));
  if (n.z < 0) n = -n;
  fr.n = n;
  return fr;
}

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double flm = f(0.5 * (a + m)), frm = f(0.5 * (m + b));
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson_rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 24);
}

// F(p) by direct quadrature of gamma - gamma_bar over the fractional window.
MinkVector oracle_corrugated_value(const Jet& fj, long a, long b, double eta, int n_corr, double x, double y) {
  const OracleFrame fr = oracle_frame(fj.dx, fj.dy, a, b);
  const double r = std::sqrt(1.0 / (fr.dpi_u * fr.dpi_u) - eta);
  const double alpha = solve_i0_inverse(1.0 / (r * fr.dpi_u));
  const double phase = n_corr * (a * x + b * y);
  const double t = phase - std::floor(phase);
  auto th = [alpha](double s) { return alpha * std::cos(2 * M_PI * s); };
  const double cu = simpson([&](double s) { return r * std::cosh(th(s)) - 1.0 / fr.dpi_u; }, 0, t, 1e-13);
  const double sn = simpson([&](double s) { return r * std::sinh(th(s)); }, 0, t, 1e-13);
  return fj.value + (1.0 / n_corr) * (cu * fr.u + sn * fr.n);
}

double modulated_eta(double, double y, double m) { return 0.75 * (1.0 + m * std::sin(2 * M_PI * y)); }

}  // namespace

TEST(AdaptedFrame, Examples) {
  const PeriodicGrid grid(8);
  const auto fx = adapted_frame(Immersion::flat_plane(grid), LinearFormZ(1, 0))[0];
  EXPECT_NEAR(euclid_norm(fx.v - MinkVector{0, 1, 0}), 0, 1e-15);
  EXPECT_NEAR(euclid_norm(fx.u - MinkVector{1, 0, 0}), 0, 1e-15);
  EXPECT_NEAR(euclid_norm(fx.n - MinkVector{0, 0, 1}), 0, 1e-15);
  EXPECT_DOUBLE_EQ(fx.dpi_u, 1.0);

  const auto fy = adapted_frame(Immersion::flat_plane(grid), LinearFormZ(0, 1))[0];
  EXPECT_NEAR(std::abs(fy.v.x), 1.0, 1e-15);
  EXPECT_NEAR(euclid_norm(fy.u - MinkVector{0, 1, 0}), 0, 1e-15);
  EXPECT_DOUBLE_EQ(fy.dpi_u, 1.0);

  const double a = 0.6;
  const auto ft = adapted_frame(tilted_plane(grid, a), LinearFormZ(1, 0))[0];
  EXPECT_NEAR(ft.dpi_u, 1.0 / std::sqrt(1 - a * a), 1e-14);
}

TEST(AdaptedFrame, MatchesGramSchmidtOracle) {
  const PeriodicGrid grid(16);
  const Immersion f = bumpy(grid, 0.08);
  for (auto [a, b] : {std::pair<long, long>{1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 3}}) {
    const auto frames = adapted_frame(f, LinearFormZ(a, b));
    for (int j = 0; j < 16; j += 3) {
      for (int i = 0; i < 16; i += 5) {
        const auto [tx, ty] = f.node_tangents(i, j);
        const OracleFrame o = oracle_frame(tx, ty, a, b);
        const FramePoint& fr = frames[grid.index(i, j)];
        EXPECT_NEAR(fr.dpi_u, o.dpi_u, 1e-12);
        EXPECT_NEAR(euclid_norm(fr.u - o.u), 0, 1e-12);
        EXPECT_NEAR(std::abs(lorentz_dot(fr.v, o.v)), 1.0, 1e-12);
        EXPECT_NEAR(euclid_norm(fr.n - o.n), 0, 1e-12);
        // orthonormality in the pullback metric and dl(v) = 0 via <v,u> = 0
        EXPECT_NEAR(lorentz_dot(fr.u, fr.u), 1, 1e-12);
        EXPECT_NEAR(lorentz_dot(fr.v, fr.v), 1, 1e-12);
        EXPECT_NEAR(lorentz_dot(fr.u, fr.v), 0, 1e-12);
        EXPECT_NEAR(lorentz_dot(fr.n, fr.n), -1, 1e-12);
      }
    }
  }
}

TEST(AdaptedFrame, RejectsTimelikeTangents) {
  try {
    frame_at({1, 0, 2}, {0, 1, 0}, LinearFormZ(1, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSpacelike);
  }
}

TEST(SolveAmplitudes, Examples) {
  FramePoint fr;
  fr.dpi_u = 1.0;
  solve_amplitudes(fr, 0.0);
  EXPECT_EQ(fr.r, 1.0);
  EXPECT_EQ(fr.alpha, 0.0);

  solve_amplitudes(fr, 0.75);
  EXPECT_DOUBLE_EQ(fr.r, 0.5);
  EXPECT_NEAR(fr.alpha, 1.81, 0.01);
  EXPECT_NEAR(bessel_i0(fr.alpha), 2.0, 1e-12);

  try {
    solve_amplitudes(fr, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MetricNotRiemannian);
  }
}

TEST(CorrugateOnce, ZeroEtaIsIdentity) {
  const PeriodicGrid grid(16);
  const Immersion f = bumpy(grid, 0.05);
  const Immersion F = corrugate_once(f, CorrugationStep(LinearFormZ(1, 1), ScalarField(grid, 0.0), 7));
  for (int j = 0; j < 16; ++j) {
    for (int i = 0; i < 16; ++i) EXPECT_LT(euclid_norm(F.node_value(i, j) - f.node_value(i, j)), 1e-12);
  }
}

TEST(CorrugateOnce, GluingWhereEtaVanishes) {
  const PeriodicGrid grid(32);
  const Immersion f = Immersion::flat_plane(grid);
  // eta supported on x in (0.25, 0.75), zero on the rest of the nodes
  const ScalarField eta = ScalarField::from_function(grid, [](double x, double) {
    return (x > 0.25 && x < 0.75) ? 0.5 * std::pow(std::sin(2 * M_PI * (x - 0.25)), 2) : 0.0;
  });
  const Immersion F = corrugate_once(f, CorrugationStep(LinearFormZ(0, 1), eta, 5));
  for (int j = 0; j < 32; ++j) {
    for (int i = 0; i < 32; ++i) {
      if (eta.at(i, j) == 0.0) {
        EXPECT_LT(euclid_norm(F.node_value(i, j) - f.node_value(i, j)), 1e-12);
      }
    }
  }
}

TEST(CorrugateOnce, NodeValuesMatchQuadratureOracle) {
  const PeriodicGrid grid(16);
  const Immersion f = bumpy(grid, 0.06);
  for (auto [a, b, n] : {std::tuple<long, long, int>{1, 0, 5}, {1, -1, 9}, {2, 1, 3}}) {
    // keep eta |l|^2 well below 1 so that mu stays Riemannian
    const double w = 1.0 / double(a * a + b * b);
    const ScalarField eta = ScalarField::from_function(grid, [w](double x, double y) {
      return w * (0.3 + 0.1 * std::sin(2 * M_PI * x) * std::cos(2 * M_PI * y));
    });
    const Immersion F = corrugate_once(f, CorrugationStep(LinearFormZ(a, b), eta, n));
    for (int j = 0; j < 16; j += 3) {
      for (int i = 0; i < 16; i += 2) {
        const double x = grid.coord(i), y = grid.coord(j);
        const MinkVector o = oracle_corrugated_value(f.jet(x, y), a, b, eta.at(i, j), n, x, y);
        EXPECT_LT(euclid_norm(F.node_value(i, j) - o), 1e-10) << a << "," << b << " N=" << n;
      }
    }
  }
}

TEST(CorrugateOnce, JacobianMatchesDifferenceQuotients) {
  const PeriodicGrid grid(16);
  const Immersion f = bumpy(grid, 0.06);
  const ScalarField eta = ScalarField::from_function(grid, [](double x, double y) {
    return 0.3 + 0.1 * std::sin(2 * M_PI * x) * std::cos(2 * M_PI * y);
  });
  const int n = 11;
  const Immersion F = corrugate_once(f, CorrugationStep(LinearFormZ(1, 1), eta, n));
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 20; ++k) {
    const double x = u(rng), y = u(rng);
    const double h = 1e-6;
    const Jet jt = F.jet(x, y);
    const MinkVector dx = (F.jet(x + h, y).value - F.jet(x - h, y).value) / (2 * h);
    const MinkVector dy = (F.jet(x, y + h).value - F.jet(x, y - h).value) / (2 * h);
    EXPECT_LT(euclid_norm(jt.dx - dx), 1e-6 * (1 + euclid_norm(dx)));
    EXPECT_LT(euclid_norm(jt.dy - dy), 1e-6 * (1 + euclid_norm(dy)));
  }
}

TEST(CorrugateOnce, TwoStageJacobianMatchesDifferenceQuotients) {
  const PeriodicGrid grid(16);
  const Immersion f = Immersion::flat_plane(grid);
  const ScalarField e1 = ScalarField::from_function(grid, [](double, double y) { return modulated_eta(0, y, 0.2) * 0.5; });
  const Immersion F1 = corrugate_once(f, CorrugationStep(LinearFormZ(1, 0), e1, 7));
  const Immersion F2 = corrugate_once(F1, CorrugationStep(LinearFormZ(0, 1), ScalarField(grid, 0.2), 15));
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 10; ++k) {
    const double x = u(rng), y = u(rng), h = 1e-7;
    const Jet jt = F2.jet(x, y);
    const MinkVector dx = (F2.jet(x + h, y).value - F2.jet(x - h, y).value) / (2 * h);
    const MinkVector dy = (F2.jet(x, y + h).value - F2.jet(x, y - h).value) / (2 * h);
    EXPECT_LT(euclid_norm(jt.dx - dx), 1e-5 * (1 + euclid_norm(dx)));
    EXPECT_LT(euclid_norm(jt.dy - dy), 1e-5 * (1 + euclid_norm(dy)));
  }
}

TEST(CorrugateOnce, Equivariance) {
  const PeriodicGrid grid(16);
  const Immersion F =
      corrugate_once(bumpy(grid, 0.05), CorrugationStep(LinearFormZ(2, -1), ScalarField(grid, 0.15), 13));
  for (int j = -2; j < 18; j += 3) {
    for (int i = -2; i < 18; i += 3) {
      EXPECT_LT(euclid_norm(F.node_value(i + 16, j) - F.node_value(i, j) - F.linear_part().ex), 1e-13);
      EXPECT_LT(euclid_norm(F.node_value(i, j + 16) - F.node_value(i, j) - F.linear_part().ey), 1e-13);
      // the continuous chart agrees with the deck action too
      const double x = grid.coord(i), y = grid.coord(j);
      EXPECT_LT(euclid_norm(F.jet(x + 1, y).value - F.jet(x, y).value - F.linear_part().ex), 1e-12);
    }
  }
}

TEST(CorrugateOnce, PlaneConstantEtaIsExactlyIsometric) {
  // constant data: the frame is constant, so d_p Gamma vanishes and F*h = mu
  const PeriodicGrid grid(32);
  const Immersion F =
      corrugate_once(Immersion::flat_plane(grid), CorrugationStep(LinearFormZ(1, 0), ScalarField(grid, 0.75), 100));
  EXPECT_LT(c0_distance(pullback(F), MetricField(grid, Sym2{0.25, 0, 1})), 1e-12);
}

TEST(CorrugateOnce, OneOverNLawWithModulatedEta) {
  const PeriodicGrid grid(32);
  const Immersion f = Immersion::flat_plane(grid);
  const ScalarField eta = ScalarField::from_function(grid, [](double x, double y) { return modulated_eta(x, y, 0.2); });
  const MetricField mu = pullback(f) - weighted_form_square(eta, 1, 0);
  std::vector<double> err;
  for (int n : {51, 101, 201, 401}) {
    const Immersion F = corrugate_once(f, CorrugationStep(LinearFormZ(1, 0), eta, n));
    err.push_back(c0_distance(pullback(F), mu));
  }
  for (std::size_t k = 1; k < err.size(); ++k) {
    EXPECT_GT(err[k] / err[k - 1], 0.35);
    EXPECT_LT(err[k] / err[k - 1], 0.65);
  }
  // error * N stays bounded
  EXPECT_LT(err.back() * 401, 2.0 * err.front() * 51);
}

TEST(CorrugateOnce, C0Proximity) {
  const PeriodicGrid grid(16);
  const Immersion f = bumpy(grid, 0.05);
  double prev = INFINITY;
  for (int n : {5, 25, 125}) {
    const Immersion F = corrugate_once(f, CorrugationStep(LinearFormZ(1, 1), ScalarField(grid, 0.3), n));
    double d = 0.0;
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) d = std::max(d, euclid_norm(F.node_value(i, j) - f.node_value(i, j)));
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, 0.01);
}

TEST(TargetDifferential, ExactIdentity) {
  const PeriodicGrid grid(16);
  EXPECT_LT(target_differential_check(Immersion::flat_plane(grid),
                                      CorrugationStep(LinearFormZ(1, 0), ScalarField(grid, 0.0), 3)),
            1e-12);
  for (int n : {1, 17, 100, 1000}) {
    EXPECT_LT(target_differential_check(Immersion::flat_plane(grid),
                                        CorrugationStep(LinearFormZ(1, 0), ScalarField(grid, 0.75), n)),
              1e-8);
  }
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0, 0.4);
  std::vector<double> vals(grid.size());
  for (auto& v : vals) v = u(rng);
  const ScalarField eta(grid, vals);
  EXPECT_LT(target_differential_check(bumpy(grid, 0.05), CorrugationStep(LinearFormZ(1, -1), eta, 37)), 1e-8);
}

TEST(CorrugateOnce, TabulatedBase) {
  const PeriodicGrid grid(32);
  std::vector<MinkVector> per(grid.size());
  for (int j = 0; j < 32; ++j)
    for (int i = 0; i < 32; ++i) per[grid.index(i, j)] = {0, 0, 0.03 * std::sin(2 * M_PI * grid.coord(i))};
  const Immersion f = Immersion::tabulated(grid, LinearPart{}, per);
  const Immersion F = corrugate_once(f, CorrugationStep(LinearFormZ(0, 1), ScalarField(grid, 0.3), 41));
  EXPECT_TRUE(pullback(F).is_positive_definite());
  EXPECT_LT(target_differential_check(f, CorrugationStep(LinearFormZ(0, 1), ScalarField(grid, 0.3), 41)), 1e-8);
}

TEST(CorrugateOnce, GridMismatch) {
  try {
    corrugate_once(Immersion::flat_plane(PeriodicGrid(8)),
                   CorrugationStep(LinearFormZ(1, 0), ScalarField(PeriodicGrid(16), 0.1), 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
  }
}

TEST(Pipeline, EmptyAndSingleTerm) {
  const PeriodicGrid grid(16);
  const Immersion f = bumpy(grid, 0.05);
  const auto empty = run_pipeline(f, Decomposition{}, std::vector<int>{});
  for (int j = 0; j < 16; ++j) {
    for (int i = 0; i < 16; ++i) {
      EXPECT_EQ(euclid_norm(empty.immersion.node_value(i, j) - f.node_value(i, j)), 0.0);
    }
  }

  const ScalarField eta(grid, 0.3);
  Decomposition one;
  one.terms.push_back({LinearFormZ(1, 1), eta});
  const auto res = run_pipeline(f, one, std::vector<int>{9});
  const Immersion direct = corrugate_once(f, CorrugationStep(LinearFormZ(1, 1), eta, 9));
  for (int j = 0; j < 16; ++j) {
    for (int i = 0; i < 16; ++i) {
      EXPECT_EQ(euclid_norm(res.immersion.node_value(i, j) - direct.node_value(i, j)), 0.0);
    }
  }
}

TEST(Pipeline, TwoTermsOnThePlane) {
  const PeriodicGrid grid(16);
  const Decomposition dec = decompose(MetricField(grid, Sym2{0.75, 0, 0.75}));
  const auto res = run_pipeline(Immersion::flat_plane(grid), dec, std::vector<int>{400, 400, 400, 400});
  const MetricField g = pullback(res.immersion);
  EXPECT_LT(c0_distance(g, MetricField(grid, Sym2{0.25, 0, 0.25})), 0.01);
  EXPECT_TRUE(g.is_positive_definite());
  // zero-coefficient diagonal terms are skipped
  EXPECT_TRUE(res.log[2].skipped);
  EXPECT_TRUE(res.log[3].skipped);
  // the total error is bounded by the sum of the stage errors
  double sum = 0.0;
  for (const auto& s : res.log) sum += s.c0_error;
  EXPECT_LE(c0_distance(g, MetricField(grid, Sym2{0.25, 0, 0.25})), sum + 1e-12);
}

TEST(Pipeline, IntermediateMetricNotRiemannian) {
  const PeriodicGrid grid(16);
  Decomposition dec;
  dec.terms.push_back({LinearFormZ(1, 0), ScalarField(grid, 0.6)});
  dec.terms.push_back({LinearFormZ(1, 0), ScalarField(grid, 0.6)});
  try {
    run_pipeline(Immersion::flat_plane(grid), dec, std::vector<int>{50, 50});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IntermediateMetricNotRiemannian);
    EXPECT_NE(std::string(e.what()).find("stage 1"), std::string::npos);
  }
}

TEST(Pipeline, AutomaticPolicyMeetsBudget) {
  const PeriodicGrid grid(16);
  const MetricField delta = MetricField::from_function(grid, [](double x, double y) {
    return Sym2{0.4 + 0.1 * std::sin(2 * M_PI * y), 0.1 * std::cos(2 * M_PI * x), 0.5};
  });
  const Immersion f = bumpy(grid, 0.04);
  const double eps = 0.02;
  const auto res = run_pipeline(f, decompose(delta), NPolicy::automatic(eps));
  const MetricField target = pullback(f) - delta;
  EXPECT_LE(c0_distance(pullback(res.immersion), target), eps);
  for (int n : res.n_corr) EXPECT_TRUE(n == 0 || n % 2 == 1);
}
