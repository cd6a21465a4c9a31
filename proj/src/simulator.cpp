#include "tlsinv/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "tlsinv/error.hpp"
#include "tlsinv/parallel.hpp"

namespace tlsinv {

namespace {

constexpr double kDbhMinCm = 4.0;
constexpr double kDbhMaxCm = 40.0;
constexpr double kHeightMin = 2.0;
constexpr double kHeightMax = 15.0;
constexpr double kCrownBaseFraction = 0.85;
constexpr double kTwigMinLength = 0.3;
constexpr double kTwigMaxLength = 0.8;

double truncated_normal(std::mt19937_64& rng, double mean, double sd, double lo, double hi) {
  if (sd == 0.0) return std::clamp(mean, lo, hi);
  std::normal_distribution<double> dist(mean, sd);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double x = dist(rng);
    if (x >= lo && x <= hi) return x;
  }
  return std::clamp(mean, lo, hi);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Lattice coordinates in [-half, half] along one axis.
std::vector<double> lattice_sites(double half, double spacing, double offset) {
  const int centered_count = static_cast<int>(std::floor(2.0 * half / spacing + 1e-9)) + 1;
  const double start = -(centered_count - 1) * spacing / 2.0 + offset;
  const auto lo = static_cast<long>(std::floor((-half - start) / spacing)) - 1;
  const auto hi = static_cast<long>(std::ceil((half - start) / spacing)) + 1;
  std::vector<double> sites;
  for (long j = lo; j <= hi; ++j) {
    const double s = start + static_cast<double>(j) * spacing;
    if (std::abs(s) <= half + 1e-9) sites.push_back(s);
  }
  return sites;
}

// Anything a beam can hit besides the ground, reduced to what the per-line
// azimuth culling needs.
struct Target {
  bool is_cylinder = true;
  Point3 center;  // axis point at z=0 for cylinders
  double radius = 0.0;
  double z_base = 0.0;
  double z_top = 0.0;
  double azimuth = 0.0;     // radians, of the horizontal center
  double half_width = 0.0;  // radians
  bool everywhere = false;  // scanner inside the horizontal footprint
};

std::vector<Target> collect_targets(const ForestTruth& forest) {
  std::vector<Target> targets;
  const double slope_pad = std::abs(forest.ground.normal.x) + std::abs(forest.ground.normal.y);
  auto finish = [&](Target t) {
    const double d = std::hypot(t.center.x, t.center.y);
    if (d <= t.radius + 1e-9) {
      t.everywhere = true;
    } else {
      t.azimuth = std::atan2(t.center.y, t.center.x);
      t.half_width = std::asin(t.radius / d) + 1e-9;
    }
    targets.push_back(t);
  };
  for (const auto& tree : forest.trees) {
    const double r = tree.dbh_m / 2.0;
    const double ground_z = forest.ground.z_at(tree.position_x_m, tree.position_y_m);
    Target trunk;
    trunk.center = {tree.position_x_m, tree.position_y_m, 0.0};
    trunk.radius = r;
    // Reach below the surface on slopes so the stem meets the ground all round.
    trunk.z_base = ground_z - r * slope_pad / forest.ground.normal.z - 0.01;
    trunk.z_top = ground_z + tree.height_m;
    finish(trunk);

    // Twigs become point targets every sample step; those inside the stem are
    // hidden anyway.
    for (const auto& seg : tree.crown) {
      const Point3 span = seg.tip - seg.root;
      const double length = norm(span);
      for (double t = forest.twig_sample_step_m; t <= length + 1e-9; t += forest.twig_sample_step_m) {
        const Point3 p = seg.root + (t / length) * span;
        if (std::hypot(p.x - tree.position_x_m, p.y - tree.position_y_m) <= r + forest.twig_radius_m) continue;
        Target twig;
        twig.is_cylinder = false;
        twig.radius = forest.twig_radius_m;
        twig.center = p;
        finish(twig);
      }
    }
  }
  return targets;
}

double wrap_pi(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

std::optional<double> ground_hit(const ForestTruth& forest, const Point3& dir) {
  const double denom = dot(forest.ground.normal, dir);
  if (!(denom < 0.0)) return std::nullopt;
  const double t = -forest.ground.offset / denom;
  if (!(t > 0.0)) return std::nullopt;
  const double limit = forest.extent_half_side_m + forest.ground_margin_m;
  if (std::abs(t * dir.x) > limit || std::abs(t * dir.y) > limit) return std::nullopt;
  return t;
}

std::optional<double> target_hit(const Target& t, const Point3& dir) {
  static const Point3 origin{};
  if (t.is_cylinder) return ray_cylinder_intersection(origin, dir, t.center.x, t.center.y, t.radius, t.z_base, t.z_top);
  return ray_sphere_intersection(origin, dir, t.center, t.radius);
}

}  // namespace

double ForestTruth::stem_density() const {
  const double side = 2.0 * extent_half_side_m;
  return static_cast<double>(trees.size()) / (side * side);
}

void validate(const ForestConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (!(c.row_spacing_m > 0.0) || !(c.col_spacing_m > 0.0)) fail("spacings must be positive");
  // Sum of radii is at most the DBH truncation bound.
  if (std::min(c.row_spacing_m, c.col_spacing_m) < kDbhMaxCm / 100.0) fail("spacing below 0.4 m lets stems overlap");
  if (!(c.vacancy_probability >= 0.0 && c.vacancy_probability <= 1.0)) fail("vacancy_probability must be in [0, 1]");
  if (!(c.outlier_rate >= 0.0 && c.outlier_rate <= 1.0)) fail("outlier_rate must be in [0, 1]");
  if (!(c.dbh_sd_cm >= 0.0) || !(c.height_sd_m >= 0.0)) fail("standard deviations must be >= 0");
  if (!(c.dbh_mean_cm > 0.0) || !(c.height_mean_m > 1.3)) fail("dbh_mean_cm must be > 0 and height_mean_m > 1.3");
  if (!(c.extent_half_side_m > 0.0)) fail("extent_half_side_m must be positive");
  if (!(c.scanner_height_m > 0.0)) fail("scanner_height_m must be positive");
  if (!(std::abs(c.ground_tilt_deg) < 45.0)) fail("ground_tilt_deg must be within (-45, 45)");
  if (c.crown_segment_count < 0) fail("crown_segment_count must be >= 0");
  if (!(c.crown_cone_half_angle_deg >= 0.0 && c.crown_cone_half_angle_deg <= 90.0)) {
    fail("crown_cone_half_angle_deg must be in [0, 90]");
  }
  if (!(c.twig_radius_m > 0.0) || !(c.twig_sample_step_m > 0.0)) fail("twig radius and sample step must be positive");
  if (!(c.ground_margin_m >= 0.0)) fail("ground_margin_m must be >= 0");
}

ForestTruth generate_forest(const ForestConfig& config, std::uint64_t seed) {
  validate(config);
  ForestTruth forest;
  forest.extent_half_side_m = config.extent_half_side_m;
  forest.scanner_height_m = config.scanner_height_m;
  forest.outlier_rate = config.outlier_rate;
  forest.twig_radius_m = config.twig_radius_m;
  forest.twig_sample_step_m = config.twig_sample_step_m;
  forest.ground_margin_m = config.ground_margin_m;

  const double tilt = deg_to_rad(config.ground_tilt_deg);
  const Point3 normal{std::sin(tilt), 0.0, std::cos(tilt)};
  // The scanner sits scanner_height_m above the ground point below it.
  forest.ground = Plane::from_normal_offset(normal, config.scanner_height_m * normal.z);

  const auto xs = lattice_sites(config.extent_half_side_m, config.col_spacing_m, config.grid_offset_x_m);
  const auto ys = lattice_sites(config.extent_half_side_m, config.row_spacing_m, config.grid_offset_y_m);
  if (xs.empty() || ys.empty()) {
    forest.warnings.emplace_back("EmptyForest: extent holds no lattice site");
    return forest;
  }

  std::mt19937_64 rng(derive_seed(seed, 0));
  const double cone = deg_to_rad(config.crown_cone_half_angle_deg);
  int next_id = 1;
  for (double y : ys) {
    for (double x : xs) {
      if (uniform(rng, 0.0, 1.0) < config.vacancy_probability) continue;

      TreeTruth tree;
      tree.id = next_id++;
      tree.position_x_m = x;
      tree.position_y_m = y;
      tree.dbh_m = truncated_normal(rng, config.dbh_mean_cm, config.dbh_sd_cm, kDbhMinCm, kDbhMaxCm) / 100.0;
      tree.height_m = truncated_normal(rng, config.height_mean_m, config.height_sd_m, kHeightMin, kHeightMax);
      tree.crown_segment_count = config.crown_segment_count;
      tree.crown_cone_half_angle_deg = config.crown_cone_half_angle_deg;

      const double ground_z = forest.ground.z_at(x, y);
      const double top_z = ground_z + tree.height_m;
      for (int s = 0; s < config.crown_segment_count; ++s) {
        const double root_h = tree.height_m * uniform(rng, kCrownBaseFraction, 1.0);
        const double cos_polar = uniform(rng, std::cos(cone), 1.0);
        const double az = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const double length = uniform(rng, kTwigMinLength, kTwigMaxLength);
        const double sin_polar = std::sqrt(std::max(0.0, 1.0 - cos_polar * cos_polar));
        const Point3 dir{sin_polar * std::cos(az), sin_polar * std::sin(az), cos_polar};
        const Point3 root{x, y, ground_z + root_h};

        double clipped = length;
        if (dir.z > 0.0) clipped = std::min(clipped, (top_z - config.twig_radius_m - root.z) / dir.z);
        if (clipped < config.twig_sample_step_m) continue;
        tree.crown.push_back({root, root + clipped * dir});
      }
      forest.trees.push_back(std::move(tree));
    }
  }
  return forest;
}

std::optional<double> ray_cylinder_intersection(const Point3& origin, const Point3& direction, double axis_x,
                                                double axis_y, double radius_m, double z_base, double z_top) {
  const double ox = origin.x - axis_x;
  const double oy = origin.y - axis_y;
  const double a = direction.x * direction.x + direction.y * direction.y;
  if (a == 0.0) return std::nullopt;
  const double b = 2.0 * (ox * direction.x + oy * direction.y);
  const double c = ox * ox + oy * oy - radius_m * radius_m;
  double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) {
    if (disc < -1e-12 * b * b) return std::nullopt;
    disc = 0.0;  // tangent within rounding
  }
  const double sq = std::sqrt(disc);
  // Numerically stable root pair.
  const double q = -0.5 * (b + std::copysign(sq, b));
  double t1 = q / a;
  double t2 = q != 0.0 ? c / q : t1;
  if (t1 > t2) std::swap(t1, t2);
  for (double t : {t1, t2}) {
    if (!(t > 1e-12)) continue;
    const double z = origin.z + t * direction.z;
    if (z >= z_base && z <= z_top) return t;
  }
  return std::nullopt;
}

std::optional<double> ray_sphere_intersection(const Point3& origin, const Point3& direction, const Point3& center,
                                              double radius_m) {
  const Point3 oc = origin - center;
  const double b = dot(oc, direction);
  const double c = dot(oc, oc) - radius_m * radius_m;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t1 = -b - sq;
  if (t1 > 1e-12) return t1;
  const double t2 = -b + sq;
  if (t2 > 1e-12) return t2;
  return std::nullopt;
}

std::optional<double> first_hit_range(const ForestTruth& forest, const Point3& direction) {
  std::optional<double> best = ground_hit(forest, direction);
  for (const auto& t : collect_targets(forest)) {
    const auto hit = target_hit(t, direction);
    if (hit && (!best || *hit < *best)) best = hit;
  }
  return best;
}

Scan simulate_scan(const ForestTruth& forest, const ScannerConfig& scanner, std::uint64_t seed,
                   const SimulateOptions& options) {
  validate(scanner);
  Scan scan;
  scan.config = scanner;

  const int lines = scanner.line_count();
  const int beams = scanner.beam_count();
  const auto targets = collect_targets(forest);

  std::vector<double> sin_el(static_cast<std::size_t>(beams));
  std::vector<double> cos_el(static_cast<std::size_t>(beams));
  for (int b = 0; b < beams; ++b) {
    const double el = deg_to_rad(scanner.elevation_of_beam(b));
    sin_el[static_cast<std::size_t>(b)] = std::sin(el);
    cos_el[static_cast<std::size_t>(b)] = std::cos(el);
  }

  const double divergence = scanner.beam_divergence_mrad * 1e-3;
  std::vector<std::vector<ScanRecord>> per_line(static_cast<std::size_t>(lines));

  parallel_for(static_cast<std::size_t>(lines), options.threads, [&](std::size_t line) {
    const double az_deg = scanner.azimuth_of_line(static_cast<int>(line));
    const double az = deg_to_rad(az_deg);
    const double ca = std::cos(az);
    const double sa = std::sin(az);

    // Targets whose horizontal footprint covers this azimuth (front) or the
    // opposite one (back, reached by beams past the zenith or nadir).
    std::vector<const Target*> front, back;
    for (const auto& t : targets) {
      if (t.everywhere) {
        front.push_back(&t);
        back.push_back(&t);
        continue;
      }
      if (std::abs(wrap_pi(az - t.azimuth)) <= t.half_width) front.push_back(&t);
      if (std::abs(wrap_pi(az + std::numbers::pi - t.azimuth)) <= t.half_width) back.push_back(&t);
    }

    std::mt19937_64 rng(derive_seed(seed, line + 1));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto& out = per_line[line];

    for (int b = 0; b < beams; ++b) {
      const double ce = cos_el[static_cast<std::size_t>(b)];
      const Point3 dir{ce * ca, ce * sa, sin_el[static_cast<std::size_t>(b)]};

      std::optional<double> best = ground_hit(forest, dir);
      const auto& candidates = ce >= 0.0 ? front : back;
      for (const Target* t : candidates) {
        const auto hit = target_hit(*t, dir);
        if (hit && (!best || *hit < *best)) best = hit;
      }
      if (!best) continue;

      const double truth = *best;
      const double u_outlier = unit(rng);
      const double u_spurious = unit(rng);
      const double noise = gauss(rng);
      const double intensity_noise = gauss(rng);

      double range;
      if (u_outlier < forest.outlier_rate) {
        if (!(truth > scanner.min_range_m)) continue;
        range = scanner.min_range_m + u_spurious * (truth - scanner.min_range_m);
      } else {
        const double footprint = scanner.footprint_noise_scale * divergence * truth;
        const double sigma = std::sqrt(scanner.range_noise_sigma_m * scanner.range_noise_sigma_m + footprint * footprint);
        range = truth + sigma * noise;
      }
      if (range < scanner.min_range_m || range > scanner.max_range_m) continue;

      ScanRecord rec;
      rec.line_index = static_cast<std::uint32_t>(line);
      rec.beam_index = static_cast<std::uint32_t>(b);
      rec.elevation_deg = scanner.elevation_of_beam(b);
      rec.azimuth_deg = az_deg;
      rec.range_m = range;
      rec.intensity = static_cast<std::uint8_t>(std::clamp(std::lround(128.0 + 2.0 * intensity_noise), 0L, 255L));
      out.push_back(rec);
    }
  });

  std::size_t total = 0;
  for (const auto& v : per_line) total += v.size();
  scan.records.reserve(total);
  for (auto& v : per_line) {
    scan.records.insert(scan.records.end(), v.begin(), v.end());
    std::vector<ScanRecord>().swap(v);
  }
  return scan;
}

}  // namespace tlsinv
