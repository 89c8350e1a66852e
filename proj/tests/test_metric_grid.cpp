#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "lorentz_ci/metric_grid.hpp"

using namespace lorentz_ci;

namespace {

Immersion tilted_plane(PeriodicGrid grid, double a) {
  auto chart = std::make_shared<FunctionChart>([a](double x, double y) {
    return Jet{{x, y, a * x}, {1, 0, a}, {0, 1, 0}};
  });
  return Immersion::analytic(grid, LinearPart{{1, 0, a}, {0, 1, 0}}, chart);
}

// brute-force extreme ratios of g2(v)/g1(v) over sampled directions
std::pair<double, double> sampled_ratio(const Sym2& g1, const Sym2& g2, int samples) {
  double lo = INFINITY, hi = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double t = M_PI * k / samples;
    const double q = g2.eval(std::cos(t), std::sin(t)) / g1.eval(std::cos(t), std::sin(t));
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  return {lo, hi};
}

}  // namespace

TEST(PeriodicGrid, WrapsAndRejectsSmall) {
  const PeriodicGrid g(8);
  EXPECT_EQ(g.wrap(-1), 7);
  EXPECT_EQ(g.wrap(8), 0);
  EXPECT_EQ(g.wrap(-17), 7);
  EXPECT_DOUBLE_EQ(g.spacing(), 0.125);
  EXPECT_THROW(PeriodicGrid(7), Error);
}

TEST(Pullback, FlatAndTiltedPlanes) {
  const PeriodicGrid grid(16);
  const MetricField flat = pullback(Immersion::flat_plane(grid));
  EXPECT_EQ(c0_distance(flat, MetricField(grid, Sym2{1, 0, 1})), 0.0);

  const double a = 0.6;
  const MetricField tilt = pullback(tilted_plane(grid, a));
  EXPECT_NEAR(c0_distance(tilt, MetricField(grid, Sym2{1 - a * a, 0, 1})), 0.0, 1e-15);
}

TEST(Pullback, TabulatedCentredDifferences) {
  const PeriodicGrid grid(64);
  // periodic bump on the flat plane; exact pullback known in closed form
  const double c = 0.05;
  std::vector<MinkVector> per(grid.size());
  for (int j = 0; j < 64; ++j)
    for (int i = 0; i < 64; ++i)
      per[grid.index(i, j)] = {0, 0, c * std::sin(2 * M_PI * grid.coord(i))};
  const Immersion f = Immersion::tabulated(grid, LinearPart{}, per);
  EXPECT_EQ(f.derivative_mode(), DerivativeMode::CenteredDifference);
  const MetricField g = pullback(f);
  double err = 0.0;
  for (int i = 0; i < 64; ++i) {
    const double zx = c * 2 * M_PI * std::cos(2 * M_PI * grid.coord(i));
    err = std::max(err, std::abs(g.at(i, 3).E - (1 - zx * zx)));
  }
  // second-order truncation error of the centred difference
  EXPECT_LT(err, 1e-3);
}

TEST(Immersion, EquivariantNodeValues) {
  const PeriodicGrid grid(16);
  const Immersion f = tilted_plane(grid, 0.3);
  for (int j = -3; j < 20; j += 5) {
    for (int i = -3; i < 20; i += 4) {
      const MinkVector dx = f.node_value(i + 16, j) - f.node_value(i, j);
      const MinkVector dy = f.node_value(i, j + 16) - f.node_value(i, j);
      EXPECT_NEAR(euclid_norm(dx - f.linear_part().ex), 0.0, 1e-14);
      EXPECT_NEAR(euclid_norm(dy - f.linear_part().ey), 0.0, 1e-14);
    }
  }
}

TEST(C0Distance, Examples) {
  const PeriodicGrid grid(8);
  const MetricField a(grid, Sym2{2, 0, 1});
  EXPECT_EQ(c0_distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(c0_distance(a, MetricField(grid, Sym2{1, 0, 1})), 1.0);
  EXPECT_DOUBLE_EQ(c0_distance(MetricField(grid, Sym2{1, 0.5, 1}), MetricField(grid, Sym2{1, 0, 1})), 0.5);
  try {
    c0_distance(a, MetricField(PeriodicGrid(9), Sym2{1, 0, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
  }
}

TEST(Dilatation, Examples) {
  const PeriodicGrid grid(8);
  const MetricField g1(grid, Sym2{1.3, 0.2, 0.7});
  EXPECT_NEAR(dilatation_id(g1, g1.scaled(3.7)), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(dilatation_id(MetricField(grid, Sym2{1, 0, 1}), MetricField(grid, Sym2{1, 0, 4})), 2.0);
  EXPECT_NEAR(teich_distance_bound(g1, g1), 0.0, 1e-15);
  EXPECT_NEAR(teich_distance_bound(MetricField(grid, Sym2{1, 0, 1}), MetricField(grid, Sym2{1, 0, 4})),
              0.5 * std::log(2.0), 1e-15);
  try {
    dilatation_id(g1, MetricField(grid, Sym2{1, 2, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
}

TEST(Dilatation, MatchesDirectionSampling) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> d(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Sym2 a{}, b{};
    do a = {1 + d(rng), d(rng), 1 + d(rng)}; while (!a.is_positive_definite() || a.det() < 0.05);
    do b = {1 + d(rng), d(rng), 1 + d(rng)}; while (!b.is_positive_definite() || b.det() < 0.05);
    const auto [lo, hi] = pencil_eigenvalues(b, a);
    const auto [slo, shi] = sampled_ratio(a, b, 10000);
    EXPECT_NEAR(lo, slo, 1e-6 * hi);
    EXPECT_NEAR(hi, shi, 1e-6 * hi);
  }
}

TEST(Dilatation, TakesSupremumOverNodes) {
  const PeriodicGrid grid(8);
  const MetricField g1(grid, Sym2{1, 0, 1});
  const MetricField g2 = MetricField::from_function(grid, [](double x, double) {
    return Sym2{1.0, 0.0, x < 0.5 ? 1.0 : 9.0};
  });
  EXPECT_DOUBLE_EQ(dilatation_id(g1, g2), 3.0);
}

TEST(ScalarField, CatmullRomInterpolation) {
  const PeriodicGrid grid(32);
  const ScalarField c(grid, 0.75);
  EXPECT_EQ(c.sample(0.123, 0.987), 0.75);
  const ScalarField s = ScalarField::from_function(grid, [](double x, double y) {
    return std::sin(2 * M_PI * x) * std::cos(2 * M_PI * y);
  });
  EXPECT_DOUBLE_EQ(s.sample(grid.coord(5), grid.coord(9)), s.at(5, 9));
  double err = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double x = 0.0137 * k, y = 1.0 - 0.0071 * k;
    err = std::max(err, std::abs(s.sample(x, y) - std::sin(2 * M_PI * x) * std::cos(2 * M_PI * y)));
  }
  EXPECT_LT(err, 2e-3);
  // periodic wrap
  EXPECT_NEAR(s.sample(0.3, 0.2), s.sample(1.3, -0.8), 1e-14);
}

TEST(InterpolatingChart, ReproducesTabulatedNodes) {
  const PeriodicGrid grid(32);
  std::vector<MinkVector> per(grid.size());
  for (int j = 0; j < 32; ++j)
    for (int i = 0; i < 32; ++i)
      per[grid.index(i, j)] = {0.01 * std::cos(2 * M_PI * grid.coord(j)), 0, 0.1 * std::sin(2 * M_PI * grid.coord(i))};
  const Immersion f = Immersion::tabulated(grid, LinearPart{}, per);
  for (int i = 0; i < 32; i += 7) {
    const Jet jt = f.jet(grid.coord(i), grid.coord(3));
    EXPECT_NEAR(euclid_norm(jt.value - f.node_value(i, 3)), 0.0, 1e-14);
  }
}

TEST(CsvExport, Schema) {
  const PeriodicGrid grid(8);
  std::ostringstream os;
  write_metric_csv(os, MetricField(grid, Sym2{1, 0.25, 2}));
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "x,y,E,F,G");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 64);
  EXPECT_NE(os.str().find("0.125,0,1,0.25,2"), std::string::npos);
}
