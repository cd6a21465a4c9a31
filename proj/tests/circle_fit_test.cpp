#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "tlsinv/circle_fit.hpp"
#include "tlsinv/error.hpp"

using namespace tlsinv;

namespace {

std::vector<Point2> arc(double cu, double cv, double r, double start_deg, double span_deg, int n) {
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) {
    const double a = (start_deg + span_deg * i / std::max(1, n - 1)) * std::numbers::pi / 180.0;
    pts.push_back({cu + r * std::cos(a), cv + r * std::sin(a)});
  }
  return pts;
}

// Along-radius noise with a fixed seed, as a range sensor would produce.
std::vector<Point2> noisy_arc(double r, double span_deg, int n, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) {
    const double a = (-span_deg / 2.0 + span_deg * i / (n - 1)) * std::numbers::pi / 180.0;
    const double rr = r + noise(rng);
    pts.push_back({rr * std::cos(a), rr * std::sin(a)});
  }
  return pts;
}

// Uniform angles on a centered arc, isotropic Gaussian noise on both coordinates.
std::vector<Point2> isotropic_arc(double r, double span_deg, int n, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  const double half = span_deg / 2.0 * std::numbers::pi / 180.0;
  std::uniform_real_distribution<double> angle(-half, half);
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) {
    const double a = angle(rng);
    pts.push_back({r * std::cos(a) + noise(rng), r * std::sin(a) + noise(rng)});
  }
  return pts;
}

double mean_distance(std::span<const Point2> pts, double cu, double cv) {
  double s = 0.0;
  for (const auto& p : pts) s += std::hypot(p.u - cu, p.v - cv);
  return s / static_cast<double>(pts.size());
}

// Brute-force geometric fit: for a fixed center the optimal radius is the mean
// distance, so search the center on successively finer grids.
Circle grid_oracle(std::span<const Point2> pts, double cu, double cv, double half_width) {
  double best_u = cu, best_v = cv;
  double step = half_width / 50.0;
  for (int level = 0; level < 6; ++level) {
    double best_f = INFINITY;
    const double u0 = best_u, v0 = best_v;
    for (int i = -50; i <= 50; ++i) {
      for (int j = -50; j <= 50; ++j) {
        const double u = u0 + i * step, v = v0 + j * step;
        const double r = mean_distance(pts, u, v);
        const double f = geometric_objective(pts, {u, v, r});
        if (f < best_f) {
          best_f = f;
          best_u = u;
          best_v = v;
        }
      }
    }
    step /= 25.0;
  }
  return {best_u, best_v, mean_distance(pts, best_u, best_v)};
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::IoError;
}

void expect_circle(const Circle& c, double u, double v, double r, double tol) {
  EXPECT_NEAR(c.center_u, u, tol);
  EXPECT_NEAR(c.center_v, v, tol);
  EXPECT_NEAR(c.radius, r, tol);
}

}  // namespace

TEST(FitPratt, FourCardinalPoints) {
  const std::vector<Point2> pts{{4, 2}, {1, 5}, {-2, 2}, {1, -1}};
  expect_circle(fit_pratt(pts), 1.0, 2.0, 3.0, 1e-9);
  expect_circle(fit_taubin(pts), 1.0, 2.0, 3.0, 1e-9);
  expect_circle(fit_circle(pts, CircleMethod::GaussNewton), 1.0, 2.0, 3.0, 1e-9);
}

TEST(FitPratt, DegenerateInputs) {
  const std::vector<Point2> line{{0, 0}, {1, 1}, {2, 2}};
  EXPECT_EQ(code_of([&] { fit_pratt(line); }), ErrorCode::DegenerateInput);
  EXPECT_EQ(code_of([&] { fit_taubin(line); }), ErrorCode::DegenerateInput);
  const std::vector<Point2> two{{0, 0}, {1, 0}};
  EXPECT_EQ(code_of([&] { fit_pratt(two); }), ErrorCode::TooFewPoints);
  EXPECT_EQ(code_of([&] { fit_taubin(two); }), ErrorCode::TooFewPoints);
  EXPECT_EQ(code_of([&] { fit_gauss_newton(two, {0, 0, 1}); }), ErrorCode::TooFewPoints);
  const std::vector<Point2> same{{1, 1}, {1, 1}, {1, 1}};
  EXPECT_EQ(code_of([&] { fit_pratt(same); }), ErrorCode::DegenerateInput);
}

TEST(AlgebraicToGeometric, Examples) {
  expect_circle(algebraic_to_geometric({1, 0, 0, -1}), 0.0, 0.0, 1.0, 1e-15);
  expect_circle(algebraic_to_geometric({1, -2, -4, 4}), 1.0, 2.0, 1.0, 1e-15);
  expect_circle(algebraic_to_geometric({-2, 4, 8, -8}), 1.0, 2.0, 1.0, 1e-15);
  EXPECT_EQ(code_of([] { algebraic_to_geometric({0, 1, 1, 0}); }), ErrorCode::DegenerateInput);
}

TEST(CircleMethodNames, Roundtrip) {
  for (auto m : {CircleMethod::Pratt, CircleMethod::Taubin, CircleMethod::GaussNewton}) {
    EXPECT_EQ(parse_circle_method(to_string(m)), m);
  }
  EXPECT_EQ(code_of([] { parse_circle_method("kasa"); }), ErrorCode::InvalidConfig);
}

TEST(CircleFitProperty, ExactRecoveryAllMethods) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> radius(0.02, 0.2), center(-6.0, 6.0), start(0.0, 360.0), span(60.0, 360.0);
  std::uniform_int_distribution<int> count(3, 200);
  for (int t = 0; t < 300; ++t) {
    const double r = radius(rng), u = center(rng), v = center(rng);
    const auto pts = arc(u, v, r, start(rng), std::min(span(rng), 359.0), count(rng));
    for (auto m : {CircleMethod::Pratt, CircleMethod::Taubin, CircleMethod::GaussNewton}) {
      expect_circle(fit_circle(pts, m), u, v, r, 1e-9);
    }
  }
}

TEST(CircleFitProperty, Equivariance) {
  const auto pts = noisy_arc(0.08, 150.0, 60, 0.005, 3);
  for (auto m : {CircleMethod::Pratt, CircleMethod::Taubin, CircleMethod::GaussNewton}) {
    const Circle base = fit_circle(pts, m);

    std::vector<Point2> moved;
    for (const auto& p : pts) moved.push_back({p.u + 3.25, p.v - 1.5});
    const Circle t = fit_circle(moved, m);
    EXPECT_NEAR(t.center_u, base.center_u + 3.25, 1e-9);
    EXPECT_NEAR(t.center_v, base.center_v - 1.5, 1e-9);
    EXPECT_NEAR(t.radius, base.radius, 1e-9);

    const double a = 0.7, ca = std::cos(a), sa = std::sin(a);
    std::vector<Point2> rotated;
    for (const auto& p : pts) rotated.push_back({ca * p.u - sa * p.v, sa * p.u + ca * p.v});
    const Circle rot = fit_circle(rotated, m);
    EXPECT_NEAR(rot.center_u, ca * base.center_u - sa * base.center_v, 1e-9);
    EXPECT_NEAR(rot.center_v, sa * base.center_u + ca * base.center_v, 1e-9);
    EXPECT_NEAR(rot.radius, base.radius, 1e-9);

    std::vector<Point2> scaled;
    for (const auto& p : pts) scaled.push_back({2.5 * p.u, 2.5 * p.v});
    const Circle s = fit_circle(scaled, m);
    EXPECT_NEAR(s.center_u, 2.5 * base.center_u, 1e-9);
    EXPECT_NEAR(s.center_v, 2.5 * base.center_v, 1e-9);
    EXPECT_NEAR(s.radius, 2.5 * base.radius, 1e-9);
  }
}

TEST(CircleFitProperty, ConstraintSatisfaction) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto pts = noisy_arc(0.05 + 0.002 * t, 90.0 + 5.0 * t, 40, 0.01, rng());
    const auto pratt = fit_pratt_algebraic(pts);
    EXPECT_NEAR(pratt_constraint(pratt.algebraic), 1.0, 1e-9);
    const auto taubin = fit_taubin_algebraic(pts);
    EXPECT_NEAR(taubin_constraint(taubin.algebraic, pts), 1.0, 1e-9);
  }
}

TEST(CircleFitProperty, PrattTaubinAgreeOnExactData) {
  const auto pts = arc(0.3, -0.2, 0.11, 10.0, 90.0, 25);
  const Circle p = fit_pratt(pts), t = fit_taubin(pts);
  EXPECT_NEAR(p.radius, t.radius, 1e-9);
  EXPECT_NEAR(p.center_u, t.center_u, 1e-9);
  EXPECT_NEAR(p.center_v, t.center_v, 1e-9);
}

TEST(CircleFitProperty, PrattTaubinAgreeAtLowNoise) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto pts = noisy_arc(0.06, 120.0, 200, 0.002, seed);
    EXPECT_NEAR(fit_pratt(pts).radius, fit_taubin(pts).radius, 1e-4);
  }
}

// The algebraic fits differ from each other and from the geometric optimum by
// O(sigma^2 / r); at 12 mm noise on a 6 cm radius that reaches millimetres.
TEST(CircleFitOracle, NoisyArcBenchmark) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto pts = isotropic_arc(0.06, 120.0, 200, 0.012, seed);
    const Circle pratt = fit_pratt(pts);
    const Circle taubin = fit_taubin(pts);
    const Circle oracle = grid_oracle(pts, pratt.center_u, pratt.center_v, 0.05);
    EXPECT_NEAR(pratt.radius, oracle.radius, 5e-3);
    EXPECT_NEAR(taubin.radius, oracle.radius, 5e-3);
    EXPECT_NEAR(pratt.radius, taubin.radius, 2e-3);

    const auto gn = fit_gauss_newton(pts, pratt);
    EXPECT_TRUE(gn.converged);
    expect_circle(gn.circle, oracle.center_u, oracle.center_v, oracle.radius, 1e-4);
    EXPECT_LE(gn.objective, geometric_objective(pts, pratt));
  }
}

TEST(GaussNewton, FullCircleMatchesOracle) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<Point2> pts;
  for (int i = 0; i < 120; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 120.0;
    pts.push_back({1.0 + 0.1 * std::cos(a) + noise(rng), -2.0 + 0.1 * std::sin(a) + noise(rng)});
  }
  const Circle init = fit_pratt(pts);
  const auto gn = fit_gauss_newton(pts, init);
  const Circle oracle = grid_oracle(pts, init.center_u, init.center_v, 0.02);
  expect_circle(gn.circle, oracle.center_u, oracle.center_v, oracle.radius, 1e-4);
}

TEST(GaussNewton, FixedPointOnExactData) {
  const auto pts = arc(2.0, 1.0, 0.1, 0.0, 200.0, 30);
  const Circle truth{2.0, 1.0, 0.1};
  const auto gn = fit_gauss_newton(pts, truth);
  EXPECT_TRUE(gn.converged);
  EXPECT_EQ(gn.iterations, 1);
  EXPECT_DOUBLE_EQ(gn.circle.center_u, truth.center_u);
  EXPECT_DOUBLE_EQ(gn.circle.center_v, truth.center_v);
  EXPECT_DOUBLE_EQ(gn.circle.radius, truth.radius);
}

TEST(GaussNewton, NeverWorseThanInit) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 40; ++t) {
    const auto pts = noisy_arc(0.04 + 0.004 * t, 60.0 + 7.0 * t, 30, 0.012, rng());
    const Circle init = fit_pratt(pts);
    const auto gn = fit_gauss_newton(pts, init);
    EXPECT_LE(gn.objective, geometric_objective(pts, init));
  }
}

TEST(GaussNewton, InvalidOptions) {
  const auto pts = arc(0, 0, 1, 0, 180, 10);
  EXPECT_EQ(code_of([&] { fit_gauss_newton(pts, {0, 0, 1}, {0, 1e-10}); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { fit_gauss_newton(pts, {0, 0, -1}); }), ErrorCode::InvalidConfig);
}

TEST(AlgebraicResidual, ZeroOnCircle) {
  const AlgebraicCircle a{1, -2, -4, 4};
  EXPECT_DOUBLE_EQ(algebraic_residual(a, {1.0, 3.0}), 0.0);
  EXPECT_DOUBLE_EQ(algebraic_residual(a, {1.0, 2.0}), -1.0);
}
