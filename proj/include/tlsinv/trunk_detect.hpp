#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tlsinv/circle_fit.hpp"
#include "tlsinv/scan.hpp"

namespace tlsinv {

struct TransectPoint {
  double u = 0.0;  // horizontal projection (x)
  double v = 0.0;  // horizontal projection (y)
  double z = 0.0;
  double range_m = 0.0;
  double elevation_deg = 0.0;
  double azimuth_deg = 0.0;
  std::size_t source_index = 0;  // into the parent cloud
};

struct Cluster {
  std::vector<std::size_t> members;  // indices into the transect, ascending
};

struct TrunkCandidate {
  Circle circle;
  std::size_t cluster_size = 0;
  double arc_span_deg = 0.0;  // angular extent of the members around the center
};

struct DetectConfig {
  double slice_height_m = 1.3;
  double slice_half_thickness_m = 0.05;
  double k = 1.5;
  double dbh_min_m = 0.04;
  double dbh_max_m = 0.40;
  std::size_t min_cluster_points = 10;
};

void validate(const DetectConfig& config);

struct DetectDiagnostics {
  std::size_t too_small = 0;
  std::size_t fit_failed = 0;
  std::size_t gated_out = 0;
};

struct Detection {
  std::vector<TrunkCandidate> candidates;  // sorted by center (u, then v)
  DetectDiagnostics diagnostics;
};

/// Nearest-rank 5th percentile of z; the provisional ground before any plane fit.
double coarse_ground_z(const PointCloud& cloud);

/// Points with |z - z_center| <= half_thickness, projected to (u, v) = (x, y).
std::vector<TransectPoint> slice_transect(const PointCloud& cloud, double z_center_m, double half_thickness_m);

/// Chord between two returns separated by delta_angle_deg (law of cosines).
double adjacency_distance(double range_a_m, double range_b_m, double delta_angle_deg);

/// Threshold for a pair of returns: k times the larger of the horizontal and
/// vertical neighbour spacings, both evaluated at the larger of the two ranges.
double pair_threshold(double range_a_m, double range_b_m, const ScannerConfig& scanner, double k);

/// Connected components of the graph linking points whose 3-D distance is within
/// the pair threshold. Sorted by smallest member source_index.
std::vector<Cluster> cluster_transect(std::span<const TransectPoint> points, const ScannerConfig& scanner, double k);

/// 360 minus the largest angular gap between members seen from the center.
double arc_span_deg(std::span<const Point2> points, const Circle& circle);

/// Fits a Pratt circle to every large-enough cluster and keeps those whose
/// diameter passes the gate. Fit failures are tallied, never thrown.
Detection detect_trunks(std::span<const Cluster> clusters, std::span<const TransectPoint> transect,
                        const DetectConfig& config);

}  // namespace tlsinv
