#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tlsinv {

/// Acquisition geometry and sensor characteristics of a single stationary scan.
///
/// Elevation is measured from the horizontal plane. A vertically mounted 2-D
/// sensor with a -5..185 deg sweep maps to elevation = sensor_angle - 90, i.e. the
/// default -95..95 span.
struct ScannerConfig {
  double vertical_step_deg = 0.1667;
  double horizontal_step_deg = 0.04;  // rotation_speed / scan_rate
  double elevation_min_deg = -95.0;
  double elevation_max_deg = 95.0;
  double min_range_m = 0.7;
  double max_range_m = 80.0;
  double range_noise_sigma_m = 0.012;
  double rotation_speed_deg_per_s = 1.0;
  double scan_rate_hz = 25.0;
  double beam_divergence_mrad = 4.7;
  // Extra range noise sigma = scale * divergence * range. Zero disables it.
  double footprint_noise_scale = 0.0;

  int line_count() const;  // azimuth bins over a full turn
  int beam_count() const;  // elevation bins over the span, both ends inclusive
  double elevation_of_beam(int beam_index) const;
  double azimuth_of_line(int line_index) const;
};

/// Throws InvalidConfig on hard violations. Returns human-readable warnings for
/// accepted but unusual values (e.g. a step the sensor does not offer).
std::vector<std::string> validate(const ScannerConfig& config);

struct ScanRecord {
  std::uint32_t line_index = 0;
  std::uint32_t beam_index = 0;
  double elevation_deg = 0.0;
  double azimuth_deg = 0.0;
  double range_m = 0.0;
  std::uint8_t intensity = 0;
};

struct Scan {
  ScannerConfig config;
  std::vector<ScanRecord> records;  // strictly increasing by (line, beam)
};

/// Describes why a record violates the config or the ordering after previous.
std::optional<std::string> record_problem(const ScannerConfig& config, const ScanRecord& record,
                                          const ScanRecord* previous);

/// Throws InvalidRecord naming the first offending record.
void validate(const Scan& scan);

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Point3 operator*(double s, const Point3& p) { return {s * p.x, s * p.y, s * p.z}; }
  friend bool operator==(const Point3&, const Point3&) = default;
};

double dot(const Point3& a, const Point3& b);
double norm(const Point3& p);
Point3 cross(const Point3& a, const Point3& b);

/// normal . p + offset = 0, with a unit normal pointing up (normal.z > 0).
struct Plane {
  Point3 normal{0.0, 0.0, 1.0};
  double offset = 0.0;

  /// Normalizes and orients the normal. Throws DegenerateInput for a vertical
  /// or zero normal.
  static Plane from_normal_offset(const Point3& normal, double offset);

  double signed_distance(const Point3& p) const { return dot(normal, p) + offset; }
  double z_at(double x, double y) const { return -(offset + normal.x * x + normal.y * y) / normal.z; }
};

struct PointCloud {
  std::vector<Point3> points;
  std::optional<std::vector<std::uint8_t>> intensities;  // parallel to points when present

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct Spherical {
  double range_m = 0.0;
  double elevation_deg = 0.0;
  double azimuth_deg = 0.0;  // [0, 360)
};

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;  // row-major

  std::uint8_t at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
};

enum class MapMode { Range, Intensity };

double deg_to_rad(double deg);
double rad_to_deg(double rad);

/// x = R cos(el) cos(az), y = R cos(el) sin(az), z = R sin(el), for every quadrant.
Point3 spherical_to_cartesian(double range_m, double elevation_deg, double azimuth_deg);

/// Points on the z-axis report azimuth 0.
Spherical cartesian_to_spherical(const Point3& p);

PointCloud build_point_cloud(const Scan& scan);

/// Keeps points with max(|x|, |y|) <= half_side_m, in order.
PointCloud extract_square_plot(const PointCloud& cloud, double half_side_m = 5.0);

struct MapSize {
  int width = 0;
  int height = 0;
};

MapSize map_dimensions(const ScannerConfig& config);

/// Projects the scan onto the unrolled cylinder: column = azimuth bin, row =
/// elevation bin (row 0 at elevation_min). Range mode maps [min_range, max_range]
/// to [255, 0]. Bins without a return stay 0.
GrayImage render_cylindrical_map(const Scan& scan, MapMode mode);

}  // namespace tlsinv
