#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "test_support.hpp"
#include "tlsinv/error.hpp"
#include "tlsinv/height_est.hpp"

using namespace tlsinv;
using namespace tlsinv::testing;

namespace {

TopWindow window_of(const std::vector<Point3>& pts) {
  TopWindow w;
  w.points = pts;
  for (std::size_t i = 0; i < pts.size(); ++i) w.source_indices.push_back(i);
  w.z_max_m = pts.empty() ? 0.0 : std::max_element(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.z < b.z; })->z;
  return w;
}

// Exhaustive oracle: all distances, sorted by (distance, index).
std::vector<double> brute_md(const std::vector<Point3>& pts, std::size_t k) {
  const std::size_t m = pts.size();
  const std::size_t kk = std::min(k, m - 1);
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      const double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y, dz = pts[i].z - pts[j].z;
      d.emplace_back(std::sqrt(dx * dx + dy * dy + dz * dz), j);
    }
    std::sort(d.begin(), d.end());
    double sum = 0.0;
    for (std::size_t n = 0; n < kk; ++n) sum += d[n].first;
    out[i] = sum / static_cast<double>(kk);
  }
  return out;
}

std::vector<Point3> random_crown(std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> c(-0.4, 0.4), z(6.0, 6.5);
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < m; ++i) pts.push_back({c(rng), c(rng), z(rng)});
  return pts;
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

}  // namespace

TEST(ExtractCylinder, RadiusBoundary) {
  PointCloud cloud;
  cloud.points = {{0.39, 0.0, 1.0}, {0.41, 0.0, 1.0}, {0.0, -0.4, 2.0}, {-0.3, 0.3, 3.0}};
  const auto space = extract_cylinder(cloud, {0.0, 0.0}, 0.8);
  EXPECT_EQ(space.source_indices, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(space.points.size(), 2u);
  EXPECT_EQ(code_of([&] { extract_cylinder(cloud, {10.0, 10.0}, 0.8); }), ErrorCode::EmptyCylinder);
}

TEST(ExtractCylinder, OnlyOwnTreeOnLattice) {
  ForestTruth forest = bare_forest();
  forest.trees.push_back(trunk(1, 3.0, 0.0, 0.14));
  forest.trees.push_back(trunk(2, 3.0, 1.6, 0.14));
  ScannerConfig s = coarse_scanner();
  s.range_noise_sigma_m = 0.0;
  const PointCloud cloud = build_point_cloud(simulate_scan(forest, s, 1));
  const auto space = extract_cylinder(cloud, {3.0, 0.0}, 0.8);
  for (const auto& p : space.points) {
    if (p.z > -1.6) EXPECT_NEAR(std::hypot(p.x - 3.0, p.y), 0.07, 1e-9);
  }
}

TEST(TopWindow, GapRule) {
  CylinderSpace space;
  space.points = {{0, 0, 8.40}, {0, 0, 8.00}, {0, 0, 7.91}, {0, 0, 7.89}};
  space.source_indices = {0, 1, 2, 3};
  const auto w = top_window(space, 0.5);
  EXPECT_DOUBLE_EQ(w.z_max_m, 8.40);
  EXPECT_EQ(w.source_indices, (std::vector<std::size_t>{0, 1, 2}));

  CylinderSpace single;
  single.points = {{1, 2, 3}};
  single.source_indices = {7};
  const auto one = top_window(single);
  ASSERT_EQ(one.count(), 1u);
  EXPECT_EQ(one.source_indices[0], 7u);
  EXPECT_EQ(code_of([] { top_window(CylinderSpace{}); }), ErrorCode::EmptyInput);
}

TEST(Knn, CollinearArithmeticSeries) {
  std::vector<Point3> pts;
  for (int i = 0; i < 11; ++i) pts.push_back({double(i), 0.0, 0.0});
  const auto md = knn_mean_distances(window_of(pts), 10);
  EXPECT_DOUBLE_EQ(md[0], 5.5);
  EXPECT_DOUBLE_EQ(md[10], 5.5);
  // Middle point: 1,1,2,2,3,3,4,4,5,5.
  EXPECT_DOUBLE_EQ(md[5], 3.0);
}

TEST(Knn, ClampsK) {
  EXPECT_EQ(effective_k(5, 10), 4u);
  EXPECT_EQ(effective_k(50, 10), 10u);
  const std::vector<Point3> pts{{0, 0, 0}, {1, 0, 0}, {3, 0, 0}, {6, 0, 0}, {10, 0, 0}};
  const auto md = knn_mean_distances(window_of(pts), 10);
  EXPECT_DOUBLE_EQ(md[0], (1.0 + 3.0 + 6.0 + 10.0) / 4.0);
  EXPECT_DOUBLE_EQ(md[2], (3.0 + 2.0 + 3.0 + 7.0) / 4.0);
}

TEST(Knn, Errors) {
  EXPECT_EQ(code_of([] { knn_mean_distances(window_of({{0, 0, 0}}), 10); }), ErrorCode::TooFewPoints);
  EXPECT_EQ(code_of([] { knn_mean_distances(window_of({{0, 0, 0}, {1, 0, 0}}), 0); }), ErrorCode::InvalidConfig);
}

TEST(KnnProperty, ExactlyMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t m = 2 + (seed * 37) % 400;
    auto pts = random_crown(m, seed);
    // Duplicates and exact ties.
    if (m > 10) {
      pts[3] = pts[1];
      pts[5] = {pts[4].x + 0.1, pts[4].y, pts[4].z};
      pts[6] = {pts[4].x - 0.1, pts[4].y, pts[4].z};
    }
    const auto md = knn_mean_distances(window_of(pts), 10);
    EXPECT_EQ(md, brute_md(pts, 10)) << "M = " << m;
  }
  const auto big = random_crown(200, 99);
  EXPECT_EQ(knn_mean_distances(window_of(big), 10), brute_md(big, 10));
}

TEST(KnnProperty, ClusteredCrownMatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> tight(0.0, 0.01);
  std::vector<Point3> pts;
  for (int i = 0; i < 900; ++i) pts.push_back({tight(rng), tight(rng), 8.0 + tight(rng)});
  for (int i = 0; i < 100; ++i) pts.push_back({0.3 + tight(rng) * 20.0, -0.3, 7.7 + tight(rng)});
  EXPECT_EQ(knn_mean_distances(window_of(pts), 10), brute_md(pts, 10));
}

TEST(ClassifyTop, SymmetricAllTree) {
  const std::vector<Point3> square{{0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};
  const auto w = window_of(square);
  const auto c = classify_top(w, knn_mean_distances(w, 10));
  EXPECT_EQ(c.tree_points.size(), 4u);
  EXPECT_TRUE(c.low_confidence_points.empty());
}

TEST(ClassifyTop, TwoPoints) {
  const auto w = window_of({{0, 0, 8}, {0, 0.5, 8.2}});
  const auto md = knn_mean_distances(w, 10);
  const double d = std::hypot(0.5, 0.2);
  EXPECT_DOUBLE_EQ(md[0], d);
  EXPECT_DOUBLE_EQ(md[1], d);
  const auto c = classify_top(w, md);
  EXPECT_DOUBLE_EQ(c.md, d);
  EXPECT_EQ(c.tree_points.size(), 2u);
}

TEST(ClassifyTop, FarPointIsLowConfidence) {
  std::vector<Point3> pts;
  for (int i = 0; i < 30; ++i) pts.push_back({0.01 * (i % 6), 0.01 * (i / 6), 8.0});
  pts.push_back({2.0, 0.0, 8.0});
  const auto w = window_of(pts);
  const auto md = knn_mean_distances(w, 10);
  const auto oracle = brute_md(pts, 10);
  const double mean = std::accumulate(oracle.begin(), oracle.end(), 0.0) / static_cast<double>(oracle.size());
  EXPECT_GT(oracle[30], mean);
  const auto c = classify_top(w, md);
  EXPECT_EQ(c.low_confidence_points, std::vector<std::size_t>{30});
  EXPECT_EQ(c.tree_points.size(), 30u);
}

TEST(ClassifyTopProperty, PartitionAndNonEmpty) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto pts = random_crown(2 + seed * 7, seed + 500);
    const auto w = window_of(pts);
    const auto c = classify_top(w, knn_mean_distances(w, 10));
    EXPECT_FALSE(c.tree_points.empty());
    std::vector<std::size_t> all = c.tree_points;
    all.insert(all.end(), c.low_confidence_points.begin(), c.low_confidence_points.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(pts.size());
    std::iota(expected.begin(), expected.end(), std::size_t{0});
    EXPECT_EQ(all, expected);
  }
}

TEST(Uppermost, Examples) {
  const auto w = window_of({{0, 0, 8.1}, {0, 0.01, 8.3}, {0.01, 0, 8.2}});
  TopClassification c;
  c.tree_points = {0, 1, 2};
  EXPECT_DOUBLE_EQ(uppermost(w, c).point.z, 8.3);
  EXPECT_EQ(uppermost(w, c).source_index, 1u);

  c.tree_points = {2};
  EXPECT_DOUBLE_EQ(uppermost(w, c).point.z, 8.2);
  c.tree_points.clear();
  EXPECT_EQ(code_of([&] { uppermost(w, c); }), ErrorCode::NoTreePoints);
}

TEST(Uppermost, HighIsolatedOutlierIgnored) {
  std::vector<Point3> pts;
  for (int i = 0; i < 30; ++i) pts.push_back({0.02 * (i % 5), 0.02 * (i / 5), 8.0 + 0.005 * i});
  pts.push_back({0.9, 0.9, 8.45});
  const auto w = window_of(pts);
  const auto c = classify_top(w, knn_mean_distances(w, 10));
  const auto top = uppermost(w, c);
  EXPECT_NEAR(top.point.z, 8.0 + 0.005 * 29, 1e-12);
  EXPECT_EQ(top.source_index, 29u);
}

TEST(UppermostProperty, RemovingLowConfidenceNeverRaisesTop) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto pts = random_crown(20 + seed * 3, seed + 77);
    const auto w = window_of(pts);
    const auto c = classify_top(w, knn_mean_distances(w, 10));
    const double z_top = uppermost(w, c).point.z;
    if (c.low_confidence_points.empty()) continue;
    std::vector<Point3> kept;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i != c.low_confidence_points.front()) kept.push_back(pts[i]);
    }
    const auto w2 = window_of(kept);
    const auto c2 = classify_top(w2, knn_mean_distances(w2, 10));
    EXPECT_LE(uppermost(w2, c2).point.z, z_top) << "seed " << seed;
  }
}

TEST(TreeHeight, Examples) {
  EXPECT_NEAR(tree_height({0, 0, 6.7}, {0, 0, -1.7}), 8.4, 1e-12);
  EXPECT_EQ(code_of([] { tree_height({0, 0, -1.7}, {0, 0, -1.7}); }), ErrorCode::InvalidHeight);
  EXPECT_EQ(code_of([] { tree_height({0, 0, -2.0}, {0, 0, -1.7}); }), ErrorCode::InvalidHeight);
}

TEST(TreeHeight, NoiseFreeDenseCrown) {
  ForestTruth forest = bare_forest();
  TreeTruth t = trunk(1, 3.0, 1.0, 0.14, 8.43);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double ground = -1.7;
  for (int s = 0; s < 40; ++s) {
    const double az = 2.0 * std::numbers::pi * u(rng);
    const double polar = 0.7 * u(rng);
    const Point3 dir{std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), std::cos(polar)};
    const Point3 root{3.0, 1.0, ground + 8.43 * (0.85 + 0.15 * u(rng))};
    double len = 0.5;
    if (dir.z > 0.0) len = std::min(len, (ground + 8.43 - 0.015 - root.z) / dir.z);
    if (len < 0.05) continue;
    t.crown.push_back({root, root + len * dir});
  }
  forest.trees.push_back(t);
  ScannerConfig s;
  s.range_noise_sigma_m = 0.0;
  s.horizontal_step_deg = 0.1;
  s.elevation_min_deg = 30.0;
  s.elevation_max_deg = 90.0;
  const PointCloud cloud = build_point_cloud(simulate_scan(forest, s, 1));
  const auto space = extract_cylinder(cloud, {3.0, 1.0}, 0.8);
  const auto w = top_window(space);
  const auto c = classify_top(w, knn_mean_distances(w, 10));
  const double h = tree_height(uppermost(w, c).point, {3.0, 1.0, ground});
  EXPECT_NEAR(h, 8.43, 0.05);
  EXPECT_LE(h, 8.43 + 1e-9);
}
