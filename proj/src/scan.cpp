#include "tlsinv/scan.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <tuple>

#include "tlsinv/error.hpp"

namespace tlsinv {

namespace {

constexpr std::array<double, 6> kSensorSteps = {0.167, 0.25, 0.333, 0.5, 0.667, 1.0};

}  // namespace

double deg_to_rad(double deg) { return deg * (std::numbers::pi / 180.0); }
double rad_to_deg(double rad) { return rad * (180.0 / std::numbers::pi); }

int ScannerConfig::line_count() const {
  return static_cast<int>(std::lround(360.0 / horizontal_step_deg));
}

int ScannerConfig::beam_count() const {
  const double span = elevation_max_deg - elevation_min_deg;
  return static_cast<int>(std::floor(span / vertical_step_deg + 1e-9)) + 1;
}

double ScannerConfig::elevation_of_beam(int beam_index) const {
  return elevation_min_deg + beam_index * vertical_step_deg;
}

double ScannerConfig::azimuth_of_line(int line_index) const { return line_index * horizontal_step_deg; }

std::vector<std::string> validate(const ScannerConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  std::vector<std::string> warnings;

  if (!(c.vertical_step_deg > 0.0) || !std::isfinite(c.vertical_step_deg)) fail("vertical_step_deg must be positive");
  if (!(c.horizontal_step_deg > 0.0) || !std::isfinite(c.horizontal_step_deg)) fail("horizontal_step_deg must be positive");
  if (!(c.min_range_m > 0.0) || !(c.min_range_m < c.max_range_m) || !(c.max_range_m <= 80.0)) {
    fail("ranges must satisfy 0 < min_range_m < max_range_m <= 80");
  }
  if (!(c.elevation_max_deg > c.elevation_min_deg)) fail("elevation_max_deg must exceed elevation_min_deg");
  if (c.elevation_max_deg - c.elevation_min_deg > 190.0 + 1e-9) fail("elevation span exceeds 190 deg");
  if (c.elevation_min_deg < -180.0 || c.elevation_max_deg > 180.0) fail("elevation limits outside [-180, 180]");
  if (!(c.range_noise_sigma_m >= 0.0)) fail("range_noise_sigma_m must be >= 0");
  if (!(c.rotation_speed_deg_per_s > 0.0)) fail("rotation_speed_deg_per_s must be positive");
  if (!(c.scan_rate_hz > 0.0)) fail("scan_rate_hz must be positive");
  if (!(c.beam_divergence_mrad >= 0.0)) fail("beam_divergence_mrad must be >= 0");
  if (!(c.footprint_noise_scale >= 0.0)) fail("footprint_noise_scale must be >= 0");

  const bool known_step = std::any_of(kSensorSteps.begin(), kSensorSteps.end(),
                                      [&](double s) { return std::abs(s - c.vertical_step_deg) < 5e-4; });
  if (!known_step) {
    std::ostringstream msg;
    msg << "vertical_step_deg " << c.vertical_step_deg << " is not a sensor preset";
    warnings.push_back(msg.str());
  }
  return warnings;
}

std::optional<std::string> record_problem(const ScannerConfig& c, const ScanRecord& r, const ScanRecord* previous) {
  if (!std::isfinite(r.range_m) || !std::isfinite(r.elevation_deg) || !std::isfinite(r.azimuth_deg)) {
    return "non-finite value";
  }
  if (r.range_m < c.min_range_m || r.range_m > c.max_range_m) return "range outside sensor limits";
  if (r.elevation_deg < c.elevation_min_deg - 1e-6 || r.elevation_deg > c.elevation_max_deg + 1e-6) {
    return "elevation outside configured span";
  }
  if (r.azimuth_deg < 0.0 || r.azimuth_deg >= 360.0) return "azimuth outside [0, 360)";
  if (previous && std::tie(previous->line_index, previous->beam_index) >= std::tie(r.line_index, r.beam_index)) {
    return "records not strictly increasing by (line_index, beam_index)";
  }
  return std::nullopt;
}

void validate(const Scan& scan) {
  for (std::size_t i = 0; i < scan.records.size(); ++i) {
    const auto problem = record_problem(scan.config, scan.records[i], i > 0 ? &scan.records[i - 1] : nullptr);
    if (problem) throw Error(ErrorCode::InvalidRecord, "record " + std::to_string(i) + ": " + *problem);
  }
}

double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

double norm(const Point3& p) { return std::sqrt(dot(p, p)); }

Point3 cross(const Point3& a, const Point3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

Plane Plane::from_normal_offset(const Point3& normal, double offset) {
  const double len = norm(normal);
  if (!(len > 0.0) || !std::isfinite(len)) throw Error(ErrorCode::DegenerateInput, "plane normal has zero length");
  double sign = 1.0 / len;
  if (normal.z < 0.0) sign = -sign;
  Plane plane;
  plane.normal = sign * normal;
  plane.offset = sign * offset;
  if (!(plane.normal.z > 0.0)) throw Error(ErrorCode::DegenerateInput, "plane is vertical");
  return plane;
}

Point3 spherical_to_cartesian(double range_m, double elevation_deg, double azimuth_deg) {
  if (!std::isfinite(range_m) || !(range_m > 0.0)) {
    throw Error(ErrorCode::InvalidRecord, "range must be finite and positive");
  }
  if (!std::isfinite(elevation_deg) || !std::isfinite(azimuth_deg)) {
    throw Error(ErrorCode::InvalidRecord, "angles must be finite");
  }
  const double el = deg_to_rad(elevation_deg);
  const double az = deg_to_rad(azimuth_deg);
  const double horizontal = range_m * std::cos(el);
  return {horizontal * std::cos(az), horizontal * std::sin(az), range_m * std::sin(el)};
}

Spherical cartesian_to_spherical(const Point3& p) {
  const double horizontal = std::hypot(p.x, p.y);
  const double range = std::hypot(horizontal, p.z);
  if (!(range > 0.0)) throw Error(ErrorCode::DegenerateInput, "zero-length point has no direction");

  Spherical s;
  s.range_m = range;
  s.elevation_deg = rad_to_deg(std::atan2(p.z, horizontal));
  if (horizontal > 0.0) {
    double az = rad_to_deg(std::atan2(p.y, p.x));
    if (az < 0.0) az += 360.0;
    if (az >= 360.0) az = 0.0;
    s.azimuth_deg = az;
  }
  return s;
}

PointCloud build_point_cloud(const Scan& scan) {
  PointCloud cloud;
  cloud.points.reserve(scan.records.size());
  std::vector<std::uint8_t> intensities;
  intensities.reserve(scan.records.size());
  for (std::size_t i = 0; i < scan.records.size(); ++i) {
    const auto& r = scan.records[i];
    try {
      cloud.points.push_back(spherical_to_cartesian(r.range_m, r.elevation_deg, r.azimuth_deg));
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidRecord, "record " + std::to_string(i) + ": " + e.what());
    }
    intensities.push_back(r.intensity);
  }
  cloud.intensities = std::move(intensities);
  return cloud;
}

PointCloud extract_square_plot(const PointCloud& cloud, double half_side_m) {
  PointCloud out;
  std::vector<std::uint8_t> intensities;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    if (std::max(std::abs(p.x), std::abs(p.y)) <= half_side_m) {
      out.points.push_back(p);
      if (cloud.intensities) intensities.push_back((*cloud.intensities)[i]);
    }
  }
  if (cloud.intensities) out.intensities = std::move(intensities);
  return out;
}

MapSize map_dimensions(const ScannerConfig& config) { return {config.line_count(), config.beam_count()}; }

GrayImage render_cylindrical_map(const Scan& scan, MapMode mode) {
  const auto& c = scan.config;
  const MapSize size = map_dimensions(c);
  GrayImage img;
  img.width = size.width;
  img.height = size.height;
  img.values.assign(static_cast<std::size_t>(size.width) * size.height, 0);

  const double span = c.max_range_m - c.min_range_m;
  for (const auto& r : scan.records) {
    long col = std::lround(r.azimuth_deg / c.horizontal_step_deg) % size.width;
    if (col < 0) col += size.width;
    const long row = std::lround((r.elevation_deg - c.elevation_min_deg) / c.vertical_step_deg);
    if (row < 0 || row >= size.height) continue;

    std::uint8_t value = r.intensity;
    if (mode == MapMode::Range) {
      const double t = std::clamp((c.max_range_m - r.range_m) / span, 0.0, 1.0);
      value = static_cast<std::uint8_t>(std::lround(255.0 * t));
    }
    img.values[static_cast<std::size_t>(row) * size.width + col] = value;
  }
  return img;
}

}  // namespace tlsinv
