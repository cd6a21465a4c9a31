#include "tlsinv/ground_fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include "tlsinv/error.hpp"

namespace tlsinv {

namespace {

std::optional<Plane> plane_through(const Point3& a, const Point3& b, const Point3& c) {
  const Point3 n = cross(b - a, c - a);
  const double len = norm(n);
  const double scale = std::max({norm(b - a), norm(c - a), 1e-300});
  if (!(len > 1e-12 * scale * scale)) return std::nullopt;
  // Vertical planes cannot be ground.
  if (std::abs(n.z) <= 1e-9 * len) return std::nullopt;
  return Plane::from_normal_offset(n, -dot(n, a));
}

}  // namespace

void validate(const RansacConfig& c) {
  if (c.iterations < 1) throw Error(ErrorCode::InvalidConfig, "ransac iterations must be >= 1");
  if (!(c.inlier_threshold_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "ransac inlier threshold must be positive");
}

void validate(const GroundPatchConfig& c) {
  if (!(c.patch_diameter_m > 0.0) || !(c.patch_thickness_m > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "ground patch diameter and thickness must be positive");
  }
}

std::vector<Point3> extract_ground_patch(const PointCloud& cloud, const Point2& center, const GroundPatchConfig& config) {
  validate(config);
  const double r2 = 0.25 * config.patch_diameter_m * config.patch_diameter_m;
  std::vector<Point3> column;
  double z_lowest = std::numeric_limits<double>::infinity();
  for (const auto& p : cloud.points) {
    const double du = p.x - center.u, dv = p.y - center.v;
    if (du * du + dv * dv > r2) continue;
    column.push_back(p);
    z_lowest = std::min(z_lowest, p.z);
  }
  if (column.empty()) throw Error(ErrorCode::NoGroundData, "no points below the trunk center");
  const double z_cut = z_lowest + config.patch_thickness_m;
  std::erase_if(column, [&](const Point3& p) { return p.z > z_cut; });
  return column;
}

Plane fit_plane_least_squares(std::span<const Point3> points) {
  if (points.size() < 3) throw Error(ErrorCode::DegenerateInput, "plane fit needs at least 3 points");
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += Eigen::Vector3d(p.x, p.y, p.z);
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d values = eig.eigenvalues();
  if (!(values(1) > 1e-12 * std::max(values(2), 1e-300))) {
    throw Error(ErrorCode::DegenerateInput, "points are collinear");
  }
  const Eigen::Vector3d n = eig.eigenvectors().col(0);
  const Point3 normal{n.x(), n.y(), n.z()};
  return Plane::from_normal_offset(normal, -(n.dot(mean)));
}

PlaneFit ransac_plane(std::span<const Point3> points, const RansacConfig& config) {
  validate(config);
  const std::size_t n = points.size();
  if (n < 3) throw Error(ErrorCode::FitFailed, "ransac needs at least 3 points");

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const double thr = config.inlier_threshold_m;

  std::optional<Plane> best;
  std::size_t best_count = 0;
  double best_residual = std::numeric_limits<double>::infinity();

  for (int it = 0; it < config.iterations; ++it) {
    const std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    std::size_t k = pick(rng);
    if (i == j || i == k || j == k) continue;
    const auto candidate = plane_through(points[i], points[j], points[k]);
    if (!candidate) continue;

    std::size_t count = 0;
    double residual = 0.0;
    for (const auto& p : points) {
      const double d = std::abs(candidate->signed_distance(p));
      if (d <= thr) {
        ++count;
        residual += d;
      }
    }
    if (count > best_count || (count == best_count && residual < best_residual)) {
      best = candidate;
      best_count = count;
      best_residual = residual;
    }
  }
  if (!best) throw Error(ErrorCode::FitFailed, "every ransac sample was degenerate");

  std::vector<Point3> consensus;
  consensus.reserve(best_count);
  for (const auto& p : points) {
    if (std::abs(best->signed_distance(p)) <= thr) consensus.push_back(p);
  }

  Plane plane = *best;
  try {
    plane = fit_plane_least_squares(consensus);
  } catch (const Error&) {
    // Keep the sampled plane when the consensus set is degenerate.
  }

  PlaneFit fit{plane, {}};
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(plane.signed_distance(points[i])) <= thr) fit.inliers.push_back(i);
  }
  if (fit.inliers.size() < std::max<std::size_t>(config.min_inliers, 3)) {
    throw Error(ErrorCode::FitFailed, "only " + std::to_string(fit.inliers.size()) + " inliers");
  }
  return fit;
}

double plane_inclination_deg(const Plane& plane) {
  const double len = norm(plane.normal);
  const double c = std::clamp(std::abs(plane.normal.z) / len, 0.0, 1.0);
  return rad_to_deg(std::acos(c));
}

Point3 project_to_plane(const Point3& p, const Plane& plane) {
  return p - plane.signed_distance(p) * plane.normal;
}

}  // namespace tlsinv
