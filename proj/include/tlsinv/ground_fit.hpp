#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tlsinv/circle_fit.hpp"
#include "tlsinv/scan.hpp"

namespace tlsinv {

struct RansacConfig {
  int iterations = 500;
  double inlier_threshold_m = 0.02;
  std::size_t min_inliers = 20;
  std::uint64_t seed = 0;
};

struct GroundPatchConfig {
  double patch_diameter_m = 0.6;
  double patch_thickness_m = 0.1;
};

void validate(const RansacConfig& config);
void validate(const GroundPatchConfig& config);

/// The lowest patch_thickness_m of the vertical column of diameter
/// patch_diameter_m around center. Throws NoGroundData for an empty column.
std::vector<Point3> extract_ground_patch(const PointCloud& cloud, const Point2& center, const GroundPatchConfig& config);

struct PlaneFit {
  Plane plane;
  std::vector<std::size_t> inliers;  // ascending; every one within the threshold of plane
};

/// Consensus search over random 3-point samples (best count, ties by lower
/// summed residual), then a least-squares refit on the consensus set and a
/// final inlier pass against the refit plane. Throws FitFailed.
PlaneFit ransac_plane(std::span<const Point3> points, const RansacConfig& config);

/// Total least-squares plane through the points. Throws DegenerateInput.
Plane fit_plane_least_squares(std::span<const Point3> points);

/// Angle between the plane normal and the vertical, in degrees.
double plane_inclination_deg(const Plane& plane);

Point3 project_to_plane(const Point3& p, const Plane& plane);

}  // namespace tlsinv
