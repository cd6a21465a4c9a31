#pragma once

#include <span>
#include <string_view>

namespace tlsinv {

struct Point2 {
  double u = 0.0;
  double v = 0.0;
};

/// A(u^2 + v^2) + B u + C v + D = 0
struct AlgebraicCircle {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
};

struct Circle {
  double center_u = 0.0;
  double center_v = 0.0;
  double radius = 0.0;
};

struct AlgebraicFit {
  AlgebraicCircle algebraic;  // in the caller's frame, normalized to the method's constraint
  Circle circle;
};

enum class CircleMethod { Pratt, Taubin, GaussNewton };

CircleMethod parse_circle_method(std::string_view name);
std::string_view to_string(CircleMethod method);

/// Minimizes sum (A z + B u + C v + D)^2 subject to B^2 + C^2 - 4AD = 1.
AlgebraicFit fit_pratt_algebraic(std::span<const Point2> points);
Circle fit_pratt(std::span<const Point2> points);

/// Same objective subject to 4A^2 mean(z) + 4AB mean(u) + 4AC mean(v) + B^2 + C^2 = 1.
AlgebraicFit fit_taubin_algebraic(std::span<const Point2> points);
Circle fit_taubin(std::span<const Point2> points);

struct GaussNewtonOptions {
  int max_iter = 50;
  double tol = 1e-10;
};

struct GaussNewtonResult {
  Circle circle;
  int iterations = 0;
  bool converged = false;
  bool singular = false;  // Jacobian lost rank; circle is the best iterate seen
  double objective = 0.0;
};

/// Geometric least squares: minimizes sum (|p - c| - r)^2 starting from init.
/// Never returns a circle whose objective exceeds init's.
GaussNewtonResult fit_gauss_newton(std::span<const Point2> points, const Circle& init,
                                   const GaussNewtonOptions& options = {});

/// Pratt for detection, optionally refined geometrically. Throws like the fitters.
Circle fit_circle(std::span<const Point2> points, CircleMethod method);

Circle algebraic_to_geometric(const AlgebraicCircle& a);

double geometric_objective(std::span<const Point2> points, const Circle& circle);
double pratt_constraint(const AlgebraicCircle& a);
double taubin_constraint(const AlgebraicCircle& a, std::span<const Point2> points);
double algebraic_residual(const AlgebraicCircle& a, const Point2& p);

}  // namespace tlsinv
