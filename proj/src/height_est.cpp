#include "tlsinv/height_est.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tlsinv/error.hpp"

namespace tlsinv {

namespace {

constexpr std::size_t kGridThreshold = 64;

struct Neighbor {
  double distance;
  std::size_t index;
  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  }
};

double distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double mean_of_first(std::vector<Neighbor>& cand, std::size_t k) {
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += cand[i].distance;
  return sum / static_cast<double>(k);
}

std::vector<double> knn_brute(const std::vector<Point3>& pts, std::size_t k) {
  const std::size_t m = pts.size();
  std::vector<double> out(m);
  std::vector<Neighbor> cand;
  cand.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) cand.push_back({distance(pts[i], pts[j]), j});
    }
    out[i] = mean_of_first(cand, k);
  }
  return out;
}

// Uniform grid; rings of cells are visited outward until no unvisited cell can
// hold a point as close as the current k-th candidate.
std::vector<double> knn_grid(const std::vector<Point3>& pts, std::size_t k) {
  const std::size_t m = pts.size();
  Point3 lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  const double ex = hi.x - lo.x, ey = hi.y - lo.y, ez = hi.z - lo.z;
  const double largest = std::max({ex, ey, ez});
  if (!(largest > 0.0)) return knn_brute(pts, k);

  const double floor_extent = largest * 1e-3;
  const double volume = std::max(ex, floor_extent) * std::max(ey, floor_extent) * std::max(ez, floor_extent);
  double cell = std::cbrt(volume * static_cast<double>(k + 1) / static_cast<double>(m));
  auto dims = [&](double e) { return static_cast<long>(std::floor(e / cell)) + 1; };
  while (static_cast<double>(dims(ex)) * static_cast<double>(dims(ey)) * static_cast<double>(dims(ez)) >
         8.0 * static_cast<double>(m)) {
    cell *= 1.5;
  }
  const long nx = dims(ex), ny = dims(ey), nz = dims(ez);

  auto coord = [&](double v, double origin, long n) {
    return std::clamp(static_cast<long>(std::floor((v - origin) / cell)), 0L, n - 1);
  };
  std::vector<long> cell_of(m);
  std::vector<std::size_t> start(static_cast<std::size_t>(nx * ny * nz) + 1, 0);
  std::vector<long> cx(m), cy(m), cz(m);
  for (std::size_t i = 0; i < m; ++i) {
    cx[i] = coord(pts[i].x, lo.x, nx);
    cy[i] = coord(pts[i].y, lo.y, ny);
    cz[i] = coord(pts[i].z, lo.z, nz);
    cell_of[i] = (cz[i] * ny + cy[i]) * nx + cx[i];
    ++start[static_cast<std::size_t>(cell_of[i]) + 1];
  }
  for (std::size_t c = 1; c < start.size(); ++c) start[c] += start[c - 1];
  std::vector<std::size_t> members(m);
  {
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < m; ++i) members[fill[static_cast<std::size_t>(cell_of[i])]++] = i;
  }

  const long max_ring = std::max({nx, ny, nz});
  std::vector<double> out(m);
  std::vector<Neighbor> cand;
  for (std::size_t i = 0; i < m; ++i) {
    cand.clear();
    for (long r = 0; r <= max_ring; ++r) {
      for (long z = cz[i] - r; z <= cz[i] + r; ++z) {
        if (z < 0 || z >= nz) continue;
        for (long y = cy[i] - r; y <= cy[i] + r; ++y) {
          if (y < 0 || y >= ny) continue;
          const bool face = std::abs(z - cz[i]) == r || std::abs(y - cy[i]) == r;
          for (long x = cx[i] - r; x <= cx[i] + r; x += (face || r == 0) ? 1 : 2 * r) {
            if (x < 0 || x >= nx) continue;
            const auto c = static_cast<std::size_t>((z * ny + y) * nx + x);
            for (std::size_t s = start[c]; s < start[c + 1]; ++s) {
              const std::size_t j = members[s];
              if (j != i) cand.push_back({distance(pts[i], pts[j]), j});
            }
          }
        }
      }
      if (cand.size() >= k) {
        std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end());
        const double kth = cand[k - 1].distance;
        // Any point outside the visited block is at least r * cell away.
        if (kth < static_cast<double>(r) * cell * (1.0 - 1e-9) - 1e-12) break;
      }
    }
    out[i] = mean_of_first(cand, k);
  }
  return out;
}

}  // namespace

CylinderSpace extract_cylinder(const PointCloud& cloud, const Point2& center, double diameter_m) {
  if (!(diameter_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "cylinder diameter must be positive");
  CylinderSpace space;
  space.center = center;
  space.diameter_m = diameter_m;
  const double r2 = 0.25 * diameter_m * diameter_m;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    const double du = p.x - center.u, dv = p.y - center.v;
    if (du * du + dv * dv > r2) continue;
    space.points.push_back(p);
    space.source_indices.push_back(i);
  }
  if (space.points.empty()) throw Error(ErrorCode::EmptyCylinder, "no points inside the tree cylinder");
  return space;
}

TopWindow top_window(const CylinderSpace& space, double window_m) {
  if (space.points.empty()) throw Error(ErrorCode::EmptyInput, "empty cylinder space");
  if (!(window_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "top window must be positive");
  TopWindow w;
  w.z_max_m = -std::numeric_limits<double>::infinity();
  for (const auto& p : space.points) w.z_max_m = std::max(w.z_max_m, p.z);
  for (std::size_t i = 0; i < space.points.size(); ++i) {
    if (w.z_max_m - space.points[i].z < window_m) {
      w.points.push_back(space.points[i]);
      w.source_indices.push_back(space.source_indices[i]);
    }
  }
  return w;
}

std::size_t effective_k(std::size_t m, std::size_t k) { return std::min(k, m == 0 ? 0 : m - 1); }

std::vector<double> knn_mean_distances(const TopWindow& window, std::size_t k) {
  const std::size_t m = window.count();
  if (m < 2) throw Error(ErrorCode::TooFewPoints, "knn needs at least 2 points, got " + std::to_string(m));
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "knn k must be >= 1");
  const std::size_t kk = effective_k(m, k);
  return m > kGridThreshold ? knn_grid(window.points, kk) : knn_brute(window.points, kk);
}

TopClassification classify_top(const TopWindow& window, const std::vector<double>& md_i) {
  if (md_i.size() != window.count()) {
    throw Error(ErrorCode::InvalidConfig, "md_i must have one value per window point");
  }
  TopClassification c;
  c.md_i = md_i;
  if (md_i.empty()) return c;
  double sum = 0.0;
  for (double v : md_i) sum += v;
  c.md = sum / static_cast<double>(md_i.size());
  for (std::size_t i = 0; i < md_i.size(); ++i) {
    (md_i[i] <= c.md ? c.tree_points : c.low_confidence_points).push_back(i);
  }
  return c;
}

TopPoint uppermost(const TopWindow& window, const TopClassification& classification) {
  if (classification.tree_points.empty()) throw Error(ErrorCode::NoTreePoints, "no tree points in the top window");
  std::size_t best = classification.tree_points.front();
  for (std::size_t i : classification.tree_points) {
    const double z = window.points[i].z, zb = window.points[best].z;
    if (z > zb || (z == zb && window.source_indices[i] < window.source_indices[best])) best = i;
  }
  return {window.points[best], window.source_indices[best]};
}

double tree_height(const Point3& p_top, const Point3& p_zero) {
  const double h = p_top.z - p_zero.z;
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidHeight, "non-positive tree height " + std::to_string(h));
  return h;
}

}  // namespace tlsinv
