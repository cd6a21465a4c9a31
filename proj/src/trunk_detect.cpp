#include "tlsinv/trunk_detect.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "tlsinv/error.hpp"

namespace tlsinv {

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }

 private:
  std::vector<std::size_t> parent_;
};

std::int64_t cell_key(std::int64_t ix, std::int64_t iy) { return (ix << 32) ^ (iy & 0xffffffffLL); }

}  // namespace

void validate(const DetectConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (!(c.slice_height_m > 0.0) || !(c.slice_half_thickness_m > 0.0)) fail("slice height and thickness must be positive");
  if (!(c.k >= 1.0)) fail("k must be >= 1");
  if (!(c.dbh_min_m > 0.0) || !(c.dbh_min_m < c.dbh_max_m)) fail("need 0 < dbh_min_m < dbh_max_m");
  if (c.min_cluster_points < 3) fail("min_cluster_points must be >= 3");
}

double coarse_ground_z(const PointCloud& cloud) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyInput, "cannot estimate ground of an empty cloud");
  std::vector<double> z;
  z.reserve(cloud.size());
  for (const auto& p : cloud.points) z.push_back(p.z);
  const auto rank = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(z.size())));
  const auto nth = z.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(rank, 1) - 1);
  std::nth_element(z.begin(), nth, z.end());
  return *nth;
}

std::vector<TransectPoint> slice_transect(const PointCloud& cloud, double z_center_m, double half_thickness_m) {
  if (!(half_thickness_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "half_thickness_m must be positive");
  std::vector<TransectPoint> out;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    if (std::abs(p.z - z_center_m) > half_thickness_m) continue;
    if (p.x == 0.0 && p.y == 0.0 && p.z == 0.0) continue;
    const Spherical s = cartesian_to_spherical(p);
    out.push_back({p.x, p.y, p.z, s.range_m, s.elevation_deg, s.azimuth_deg, i});
  }
  return out;
}

double adjacency_distance(double range_a_m, double range_b_m, double delta_angle_deg) {
  const double c = std::cos(deg_to_rad(delta_angle_deg));
  const double sq = range_a_m * range_a_m + range_b_m * range_b_m - 2.0 * range_a_m * range_b_m * c;
  return std::sqrt(std::max(0.0, sq));
}

double pair_threshold(double range_a_m, double range_b_m, const ScannerConfig& scanner, double k) {
  const double r = std::max(range_a_m, range_b_m);
  const double d_horizontal = adjacency_distance(r, r, scanner.horizontal_step_deg);
  const double d_vertical = adjacency_distance(r, r, scanner.vertical_step_deg);
  return k * std::max(d_horizontal, d_vertical);
}

std::vector<Cluster> cluster_transect(std::span<const TransectPoint> points, const ScannerConfig& scanner, double k) {
  if (!(k >= 1.0)) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
  const std::size_t n = points.size();
  if (n == 0) return {};

  double max_range = 0.0;
  for (const auto& p : points) max_range = std::max(max_range, p.range_m);
  // The threshold grows with range, so the farthest point bounds every pair.
  const double cell = std::max(pair_threshold(max_range, max_range, scanner, k), 1e-9);

  std::vector<std::int64_t> ix(n), iy(n);
  std::unordered_map<std::int64_t, std::vector<std::size_t>> grid;
  grid.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ix[i] = static_cast<std::int64_t>(std::floor(points[i].u / cell));
    iy[i] = static_cast<std::int64_t>(std::floor(points[i].v / cell));
    grid[cell_key(ix[i], iy[i])].push_back(i);
  }

  DisjointSet sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = points[i];
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = grid.find(cell_key(ix[i] + dx, iy[i] + dy));
        if (it == grid.end()) continue;
        for (std::size_t j : it->second) {
          if (j <= i) continue;
          const auto& b = points[j];
          const double du = a.u - b.u, dv = a.v - b.v, dz = a.z - b.z;
          const double d = std::sqrt(du * du + dv * dv + dz * dz);
          if (d <= pair_threshold(a.range_m, b.range_m, scanner, k)) sets.unite(i, j);
        }
      }
    }
  }

  std::unordered_map<std::size_t, std::size_t> slot_of_root;
  std::vector<Cluster> clusters;
  std::vector<std::size_t> min_source;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = sets.find(i);
    auto [it, inserted] = slot_of_root.try_emplace(root, clusters.size());
    if (inserted) {
      clusters.emplace_back();
      min_source.push_back(points[i].source_index);
    }
    clusters[it->second].members.push_back(i);
    min_source[it->second] = std::min(min_source[it->second], points[i].source_index);
  }

  std::vector<std::size_t> order(clusters.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return min_source[a] < min_source[b]; });
  std::vector<Cluster> sorted;
  sorted.reserve(clusters.size());
  for (std::size_t idx : order) sorted.push_back(std::move(clusters[idx]));
  return sorted;
}

double arc_span_deg(std::span<const Point2> points, const Circle& circle) {
  if (points.empty()) return 0.0;
  std::vector<double> angles;
  angles.reserve(points.size());
  for (const auto& p : points) {
    angles.push_back(rad_to_deg(std::atan2(p.v - circle.center_v, p.u - circle.center_u)));
  }
  std::sort(angles.begin(), angles.end());
  double largest_gap = angles.front() + 360.0 - angles.back();
  for (std::size_t i = 1; i < angles.size(); ++i) largest_gap = std::max(largest_gap, angles[i] - angles[i - 1]);
  return 360.0 - largest_gap;
}

Detection detect_trunks(std::span<const Cluster> clusters, std::span<const TransectPoint> transect,
                        const DetectConfig& config) {
  validate(config);
  Detection result;
  std::vector<Point2> pts;
  for (const auto& cluster : clusters) {
    if (cluster.members.size() < config.min_cluster_points) {
      ++result.diagnostics.too_small;
      continue;
    }
    pts.clear();
    for (std::size_t m : cluster.members) {
      if (m >= transect.size()) throw Error(ErrorCode::InvalidConfig, "cluster member outside the transect");
      pts.push_back({transect[m].u, transect[m].v});
    }

    Circle circle;
    try {
      circle = fit_pratt(pts);
    } catch (const Error&) {
      ++result.diagnostics.fit_failed;
      continue;
    }
    const double diameter = 2.0 * circle.radius;
    if (!(diameter >= config.dbh_min_m && diameter <= config.dbh_max_m)) {
      ++result.diagnostics.gated_out;
      continue;
    }
    result.candidates.push_back({circle, cluster.members.size(), arc_span_deg(pts, circle)});
  }
  std::sort(result.candidates.begin(), result.candidates.end(), [](const TrunkCandidate& a, const TrunkCandidate& b) {
    if (a.circle.center_u != b.circle.center_u) return a.circle.center_u < b.circle.center_u;
    return a.circle.center_v < b.circle.center_v;
  });
  return result;
}

}  // namespace tlsinv
