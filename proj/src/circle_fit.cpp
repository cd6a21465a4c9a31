#include "tlsinv/circle_fit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "tlsinv/error.hpp"

namespace tlsinv {

namespace {

// Inputs shifted to their centroid and divided by the RMS distance to it.
struct Normalized {
  Eigen::MatrixX2d xy;
  double mean_u = 0.0;
  double mean_v = 0.0;
  double scale = 1.0;
};

Normalized normalize(std::span<const Point2> points) {
  if (points.size() < 3) {
    throw Error(ErrorCode::TooFewPoints, "circle fit needs at least 3 points, got " + std::to_string(points.size()));
  }
  Normalized n;
  const auto count = static_cast<Eigen::Index>(points.size());
  for (const auto& p : points) {
    if (!std::isfinite(p.u) || !std::isfinite(p.v)) throw Error(ErrorCode::DegenerateInput, "non-finite point");
    n.mean_u += p.u;
    n.mean_v += p.v;
  }
  n.mean_u /= static_cast<double>(count);
  n.mean_v /= static_cast<double>(count);

  n.xy.resize(count, 2);
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < count; ++i) {
    n.xy(i, 0) = points[static_cast<std::size_t>(i)].u - n.mean_u;
    n.xy(i, 1) = points[static_cast<std::size_t>(i)].v - n.mean_v;
    sum_sq += n.xy.row(i).squaredNorm();
  }
  n.scale = std::sqrt(sum_sq / static_cast<double>(count));
  if (!(n.scale > 0.0)) throw Error(ErrorCode::DegenerateInput, "all points coincide");
  n.xy /= n.scale;

  const Eigen::JacobiSVD<Eigen::MatrixX2d> svd(n.xy);
  const auto& sv = svd.singularValues();
  if (sv(1) < 1e-12 * sv(0)) throw Error(ErrorCode::DegenerateInput, "points are collinear");
  return n;
}

// Converts parameters fitted in the normalized frame back to the caller's frame.
AlgebraicFit finish(const Normalized& n, Eigen::Vector4d p) {
  if (p(0) < 0.0) p = -p;
  const double a = p(0), b = p(1), c = p(2), d = p(3);
  const double disc = b * b + c * c - 4.0 * a * d;
  if (!(std::abs(a) > 1e-14) || !(disc > 0.0)) {
    throw Error(ErrorCode::DegenerateInput, "fit degenerates to a line");
  }

  AlgebraicFit fit;
  fit.circle.center_u = n.mean_u - n.scale * b / (2.0 * a);
  fit.circle.center_v = n.mean_v - n.scale * c / (2.0 * a);
  fit.circle.radius = n.scale * std::sqrt(disc) / (2.0 * a);

  // Both constraints scale as 1/s^2 under u -> u/s, so multiplying the
  // parameters by s restores them; translation leaves both invariant.
  const double s = n.scale;
  const double ao = a / s, bo = b, co = c, dov = d * s;
  fit.algebraic.a = ao;
  fit.algebraic.b = bo - 2.0 * ao * n.mean_u;
  fit.algebraic.c = co - 2.0 * ao * n.mean_v;
  fit.algebraic.d = ao * (n.mean_u * n.mean_u + n.mean_v * n.mean_v) - bo * n.mean_u - co * n.mean_v + dov;
  return fit;
}

}  // namespace

CircleMethod parse_circle_method(std::string_view name) {
  if (name == "pratt") return CircleMethod::Pratt;
  if (name == "taubin") return CircleMethod::Taubin;
  if (name == "gauss_newton") return CircleMethod::GaussNewton;
  throw Error(ErrorCode::InvalidConfig, "unknown circle method '" + std::string(name) + "'");
}

std::string_view to_string(CircleMethod method) {
  switch (method) {
    case CircleMethod::Pratt: return "pratt";
    case CircleMethod::Taubin: return "taubin";
    case CircleMethod::GaussNewton: return "gauss_newton";
  }
  return "pratt";
}

AlgebraicFit fit_pratt_algebraic(std::span<const Point2> points) {
  const Normalized n = normalize(points);
  const auto count = n.xy.rows();

  Eigen::MatrixX4d design(count, 4);
  design.col(0) = n.xy.rowwise().squaredNorm();
  design.col(1) = n.xy.col(0);
  design.col(2) = n.xy.col(1);
  design.col(3).setOnes();

  const Eigen::JacobiSVD<Eigen::MatrixX4d> svd(design, Eigen::ComputeThinV);
  const Eigen::Vector4d sv = svd.singularValues();
  const Eigen::Matrix4d& v = svd.matrixV();

  Eigen::Vector4d p;
  if (sv(3) < 1e-12 * sv(0)) {
    p = v.col(3);  // data lie exactly on a circle
  } else {
    // Generalized eigenproblem M p = eta N p, rewritten with W = V S so that the
    // symmetric matrix W^T N^-1 W has one negative and three positive eigenvalues.
    // The smallest positive one belongs to the constrained minimizer.
    Eigen::Matrix4d n_inv;
    n_inv << 0, 0, 0, -0.5,
             0, 1, 0, 0,
             0, 0, 1, 0,
             -0.5, 0, 0, 0;
    const Eigen::Matrix4d w = v * sv.asDiagonal();
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(w.transpose() * n_inv * w);
    const Eigen::Vector4d e = eig.eigenvectors().col(1);  // eigenvalues come sorted ascending
    p = v * sv.cwiseInverse().asDiagonal() * e;
  }

  const double disc = p(1) * p(1) + p(2) * p(2) - 4.0 * p(0) * p(3);
  if (!(disc > 0.0)) throw Error(ErrorCode::DegenerateInput, "Pratt solution is not a real circle");
  p /= std::sqrt(disc);
  return finish(n, p);
}

Circle fit_pratt(std::span<const Point2> points) { return fit_pratt_algebraic(points).circle; }

AlgebraicFit fit_taubin_algebraic(std::span<const Point2> points) {
  const Normalized n = normalize(points);
  const auto count = n.xy.rows();

  const Eigen::VectorXd z = n.xy.rowwise().squaredNorm();
  const double z_mean = z.mean();  // 1 by construction of the scale, kept general
  const double root = 2.0 * std::sqrt(z_mean);

  Eigen::MatrixX3d design(count, 3);
  design.col(0) = (z.array() - z_mean) / root;
  design.col(1) = n.xy.col(0);
  design.col(2) = n.xy.col(1);

  const Eigen::JacobiSVD<Eigen::MatrixX3d> svd(design, Eigen::ComputeThinV);
  const Eigen::Vector3d q = svd.matrixV().col(2);

  // q is unit length and q(0)^2 = 4 A^2 mean(z) on centered data, so the
  // constraint holds exactly.
  Eigen::Vector4d p;
  p(0) = q(0) / root;
  p(1) = q(1);
  p(2) = q(2);
  p(3) = -z_mean * p(0);
  return finish(n, p);
}

Circle fit_taubin(std::span<const Point2> points) { return fit_taubin_algebraic(points).circle; }

double geometric_objective(std::span<const Point2> points, const Circle& circle) {
  double sum = 0.0;
  for (const auto& p : points) {
    const double r = std::hypot(p.u - circle.center_u, p.v - circle.center_v) - circle.radius;
    sum += r * r;
  }
  return sum;
}

GaussNewtonResult fit_gauss_newton(std::span<const Point2> points, const Circle& init,
                                   const GaussNewtonOptions& options) {
  if (points.size() < 3) {
    throw Error(ErrorCode::TooFewPoints, "circle fit needs at least 3 points, got " + std::to_string(points.size()));
  }
  if (options.max_iter < 1 || !(options.tol > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "Gauss-Newton needs max_iter >= 1 and tol > 0");
  }
  if (!(init.radius > 0.0) || !std::isfinite(init.center_u) || !std::isfinite(init.center_v)) {
    throw Error(ErrorCode::InvalidConfig, "Gauss-Newton init must be a valid circle");
  }

  // Iterate in coordinates relative to the initial center.
  const auto count = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixX2d xy(count, 2);
  for (Eigen::Index i = 0; i < count; ++i) {
    xy(i, 0) = points[static_cast<std::size_t>(i)].u - init.center_u;
    xy(i, 1) = points[static_cast<std::size_t>(i)].v - init.center_v;
  }
  auto objective = [&](const Eigen::Vector3d& q) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < count; ++i) {
      const double r = std::hypot(xy(i, 0) - q(0), xy(i, 1) - q(1)) - q(2);
      sum += r * r;
    }
    return sum;
  };

  Eigen::Vector3d q(0.0, 0.0, init.radius);
  double f = objective(q);

  GaussNewtonResult result;
  Eigen::MatrixX3d jac(count, 3);
  Eigen::VectorXd res(count);
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    result.iterations = iter;
    bool singular = false;
    for (Eigen::Index i = 0; i < count; ++i) {
      const double du = xy(i, 0) - q(0);
      const double dv = xy(i, 1) - q(1);
      const double dist = std::hypot(du, dv);
      if (dist == 0.0) {
        singular = true;
        break;
      }
      jac(i, 0) = -du / dist;
      jac(i, 1) = -dv / dist;
      jac(i, 2) = -1.0;
      res(i) = dist - q(2);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixX3d> qr;
    if (!singular) {
      qr.setThreshold(1e-12);
      qr.compute(jac);
      singular = qr.rank() < 3;
    }
    if (singular) {
      result.singular = true;
      break;
    }

    const Eigen::Vector3d delta = -qr.solve(res);
    if (!delta.allFinite()) {
      result.singular = true;
      break;
    }
    if (delta.norm() < options.tol) {
      result.converged = true;
      break;
    }

    // Step halving keeps the objective monotone.
    double step = 1.0;
    bool improved = false;
    for (int h = 0; h < 40; ++h) {
      const Eigen::Vector3d trial = q + step * delta;
      if (trial(2) > 0.0) {
        const double ft = objective(trial);
        if (ft <= f) {
          q = trial;
          f = ft;
          improved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!improved || step * delta.norm() < options.tol) {
      result.converged = true;
      break;
    }
  }

  result.circle = {init.center_u + q(0), init.center_v + q(1), q(2)};
  result.objective = geometric_objective(points, result.circle);
  return result;
}

Circle fit_circle(std::span<const Point2> points, CircleMethod method) {
  switch (method) {
    case CircleMethod::Pratt: return fit_pratt(points);
    case CircleMethod::Taubin: return fit_taubin(points);
    case CircleMethod::GaussNewton: {
      const Circle init = fit_pratt(points);
      const auto gn = fit_gauss_newton(points, init);
      return gn.circle;
    }
  }
  return fit_pratt(points);
}

Circle algebraic_to_geometric(const AlgebraicCircle& a) {
  if (a.a == 0.0) throw Error(ErrorCode::DegenerateInput, "A = 0 describes a line");
  const double disc = a.b * a.b + a.c * a.c - 4.0 * a.a * a.d;
  if (!(disc > 0.0)) throw Error(ErrorCode::DegenerateInput, "B^2 + C^2 - 4AD must be positive");
  return {-a.b / (2.0 * a.a), -a.c / (2.0 * a.a), std::sqrt(disc) / (2.0 * std::abs(a.a))};
}

double pratt_constraint(const AlgebraicCircle& a) { return a.b * a.b + a.c * a.c - 4.0 * a.a * a.d; }

double taubin_constraint(const AlgebraicCircle& a, std::span<const Point2> points) {
  double mu = 0.0, mv = 0.0, mz = 0.0;
  for (const auto& p : points) {
    mu += p.u;
    mv += p.v;
    mz += p.u * p.u + p.v * p.v;
  }
  const double n = static_cast<double>(points.size());
  mu /= n;
  mv /= n;
  mz /= n;
  return 4.0 * a.a * a.a * mz + 4.0 * a.a * a.b * mu + 4.0 * a.a * a.c * mv + a.b * a.b + a.c * a.c;
}

double algebraic_residual(const AlgebraicCircle& a, const Point2& p) {
  return a.a * (p.u * p.u + p.v * p.v) + a.b * p.u + a.c * p.v + a.d;
}

}  // namespace tlsinv
