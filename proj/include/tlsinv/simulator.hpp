#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tlsinv/scan.hpp"

namespace tlsinv {

// Synthetic plantation plots with exact ground truth, and a first-hit ray caster
// that scans them the way a rotating 2-D profiler would.

struct CrownSegment {
  Point3 root;
  Point3 tip;
};

struct TreeTruth {
  int id = 0;
  double position_x_m = 0.0;  // stem axis at ground
  double position_y_m = 0.0;
  double dbh_m = 0.0;
  double height_m = 0.0;  // ground at the axis to the highest point of the tree
  int crown_segment_count = 0;
  double crown_cone_half_angle_deg = 0.0;
  std::vector<CrownSegment> crown;  // clipped so no twig target rises above the stem top
};

struct ForestConfig {
  double row_spacing_m = 1.6;  // along y (north-south)
  double col_spacing_m = 2.8;  // along x (west-east)
  double vacancy_probability = 0.25;
  double dbh_mean_cm = 12.11;
  double dbh_sd_cm = 2.37;
  double height_mean_m = 8.43;
  double height_sd_m = 0.78;
  double ground_tilt_deg = 0.0;  // about the y axis, falling toward +x
  double outlier_rate = 0.0;     // per-beam probability of a spurious short return
  std::uint64_t seed = 0;

  double extent_half_side_m = 5.0;
  double scanner_height_m = 1.7;
  // Shift of the lattice from its centered position.
  double grid_offset_x_m = 0.0;
  double grid_offset_y_m = 0.0;
  int crown_segment_count = 12;
  double crown_cone_half_angle_deg = 40.0;
  double twig_radius_m = 0.015;
  double twig_sample_step_m = 0.05;
  double ground_margin_m = 1.0;  // ground returns stop this far outside the extent
};

struct ForestTruth {
  std::vector<TreeTruth> trees;
  Plane ground;
  double extent_half_side_m = 5.0;
  double scanner_height_m = 1.7;
  double outlier_rate = 0.0;
  double twig_radius_m = 0.015;
  double twig_sample_step_m = 0.05;
  double ground_margin_m = 1.0;
  std::vector<std::string> warnings;  // e.g. EmptyForest

  double stem_density() const;  // trees per square meter of extent
};

/// Throws InvalidConfig.
void validate(const ForestConfig& config);

/// Deterministic for a fixed seed. Sites lie on the row/col lattice within the
/// extent; each is vacated with vacancy_probability. DBH is truncated to
/// [4, 40] cm and height to [2, 15] m.
ForestTruth generate_forest(const ForestConfig& config, std::uint64_t seed);
inline ForestTruth generate_forest(const ForestConfig& config) { return generate_forest(config, config.seed); }

/// Smallest positive ray parameter on the lateral surface of the vertical
/// cylinder, if the hit lies within [z_base, z_top].
std::optional<double> ray_cylinder_intersection(const Point3& origin, const Point3& direction, double axis_x,
                                                double axis_y, double radius_m, double z_base, double z_top);

std::optional<double> ray_sphere_intersection(const Point3& origin, const Point3& direction, const Point3& center,
                                              double radius_m);

/// Nearest surface along the unit ray from the scanner at the origin, before noise.
std::optional<double> first_hit_range(const ForestTruth& forest, const Point3& direction);

struct SimulateOptions {
  int threads = 0;
};

/// Casts every (line, beam) direction of the lattice. Records come out in
/// canonical order and are byte-identical for a given seed at any thread count.
Scan simulate_scan(const ForestTruth& forest, const ScannerConfig& scanner, std::uint64_t seed,
                   const SimulateOptions& options = {});

}  // namespace tlsinv
