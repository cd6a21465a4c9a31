#pragma once

#include <cstddef>
#include <vector>

#include "tlsinv/circle_fit.hpp"
#include "tlsinv/scan.hpp"

namespace tlsinv {

struct CylinderSpace {
  Point2 center;
  double diameter_m = 0.8;
  std::vector<Point3> points;
  std::vector<std::size_t> source_indices;  // into the parent cloud, ascending
};

struct TopWindow {
  double z_max_m = 0.0;
  std::vector<Point3> points;
  std::vector<std::size_t> source_indices;
  std::size_t count() const { return points.size(); }
};

struct TopClassification {
  std::vector<std::size_t> tree_points;            // indices into the window
  std::vector<std::size_t> low_confidence_points;  // indices into the window
  double md = 0.0;
  std::vector<double> md_i;
};

struct TopPoint {
  Point3 point;
  std::size_t source_index = 0;
};

/// Points whose horizontal distance from center is <= diameter/2.
/// Throws EmptyCylinder.
CylinderSpace extract_cylinder(const PointCloud& cloud, const Point2& center, double diameter_m);

/// Members with z_max - z < window_m. Throws EmptyInput for an empty space.
TopWindow top_window(const CylinderSpace& space, double window_m = 0.5);

/// Number of neighbours actually used: min(k, M - 1).
std::size_t effective_k(std::size_t m, std::size_t k);

/// Mean 3-D distance from every point to its effective_k nearest other points.
/// Neighbours are ordered by (distance, index) and summed in that order, so the
/// result is bit-identical to an exhaustive search. Throws TooFewPoints if M < 2.
std::vector<double> knn_mean_distances(const TopWindow& window, std::size_t k = 10);

/// md is the mean of md_i; a point is a tree point iff md_i <= md.
TopClassification classify_top(const TopWindow& window, const std::vector<double>& md_i);

/// Highest tree point, ties to the lower source index. Throws NoTreePoints.
TopPoint uppermost(const TopWindow& window, const TopClassification& classification);

/// p_top.z - p_zero.z. Throws InvalidHeight unless the result is positive.
double tree_height(const Point3& p_top, const Point3& p_zero);

}  // namespace tlsinv
