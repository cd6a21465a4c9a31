#include "tlsinv/formats.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "json.hpp"
#include "tlsinv/error.hpp"
#include "tlsinv/io.hpp"

namespace tlsinv {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    fail("line " + std::to_string(line) + ": malformed JSON");
  }
}

// Reads known keys from one JSON object and rejects the rest.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(where("") + "expected an object");
  }

  void number(const char* key, double& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number()) fail(where(key) + "expected a number");
    out = v->get<double>();
  }

  template <typename Int>
  void integer(const char* key, Int& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number_integer()) fail(where(key) + "expected an integer");
    if (v->is_number_unsigned()) {
      out = static_cast<Int>(v->get<std::uint64_t>());
    } else {
      const auto x = v->get<std::int64_t>();
      if (x < 0 && !std::is_signed_v<Int>) fail(where(key) + "expected a non-negative integer");
      out = static_cast<Int>(x);
    }
  }

  void string(const char* key, std::string& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_string()) fail(where(key) + "expected a string");
    out = v->get<std::string>();
  }

  const json* object(const char* key) { return find(key); }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) fail(where(k) + "unknown key");
    }
  }

  std::string where(std::string_view key) const {
    std::string p = path_;
    if (!key.empty()) p += (p.empty() ? "" : ".") + std::string(key);
    return p.empty() ? std::string() : "'" + p + "': ";
  }

 private:
  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_scanner(ObjectReader& r, ScannerConfig& s) {
  r.number("vertical_step_deg", s.vertical_step_deg);
  r.number("horizontal_step_deg", s.horizontal_step_deg);
  r.number("elevation_min_deg", s.elevation_min_deg);
  r.number("elevation_max_deg", s.elevation_max_deg);
  r.number("min_range_m", s.min_range_m);
  r.number("max_range_m", s.max_range_m);
  r.number("range_noise_sigma_m", s.range_noise_sigma_m);
  r.number("rotation_speed_deg_per_s", s.rotation_speed_deg_per_s);
  r.number("scan_rate_hz", s.scan_rate_hz);
  r.number("beam_divergence_mrad", s.beam_divergence_mrad);
  r.number("footprint_noise_scale", s.footprint_noise_scale);
}

void write_scanner(JsonWriter& w, const ScannerConfig& s) {
  w.begin_object();
  w.field("vertical_step_deg", s.vertical_step_deg);
  w.field("horizontal_step_deg", s.horizontal_step_deg);
  w.field("elevation_min_deg", s.elevation_min_deg);
  w.field("elevation_max_deg", s.elevation_max_deg);
  w.field("min_range_m", s.min_range_m);
  w.field("max_range_m", s.max_range_m);
  w.field("range_noise_sigma_m", s.range_noise_sigma_m);
  w.field("rotation_speed_deg_per_s", s.rotation_speed_deg_per_s);
  w.field("scan_rate_hz", s.scan_rate_hz);
  w.field("beam_divergence_mrad", s.beam_divergence_mrad);
  w.field("footprint_noise_scale", s.footprint_noise_scale);
  w.end_object();
}

void write_optional(JsonWriter& w, std::string_view key, const std::optional<double>& v) {
  w.key(key);
  if (v) {
    w.value(*v);
  } else {
    w.null();
  }
}

void write_quantity(JsonWriter& w, std::string_view key, const std::optional<QuantityMetrics>& q) {
  w.key(key);
  if (!q) {
    w.null();
    return;
  }
  w.begin_object();
  w.field("n", q->n);
  w.field("bias", q->bias);
  w.field("bias_pct", q->bias_pct);
  w.field("rmse", q->rmse);
  w.field("rmse_pct", q->rmse_pct);
  w.field("mean_reference", q->mean_reference);
  w.end_object();
}

void write_metrics(JsonWriter& w, const Metrics& m) {
  w.begin_object();
  w.field("n_reference", m.n_reference);
  w.field("correct", m.correct);
  w.field("false_detection", m.false_detection);
  w.field("omission", m.omission);
  w.field("detection_rate", m.detection_rate);
  write_quantity(w, "dbh_cm", m.dbh_cm);
  write_quantity(w, "height_m", m.height_m);
  w.end_object();
}

double required_number(const json& obj, const char* key, std::size_t index) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    fail("trees[" + std::to_string(index) + "]." + key + ": expected a number");
  }
  return it->get<double>();
}

}  // namespace

SimulationSetup parse_simulation_json(std::string_view text) {
  const json root = parse_json(text);
  SimulationSetup s;
  ObjectReader r(root, "");
  auto& f = s.forest;
  r.number("row_spacing_m", f.row_spacing_m);
  r.number("col_spacing_m", f.col_spacing_m);
  r.number("vacancy_probability", f.vacancy_probability);
  r.number("dbh_mean_cm", f.dbh_mean_cm);
  r.number("dbh_sd_cm", f.dbh_sd_cm);
  r.number("height_mean_m", f.height_mean_m);
  r.number("height_sd_m", f.height_sd_m);
  r.number("ground_tilt_deg", f.ground_tilt_deg);
  r.number("outlier_rate", f.outlier_rate);
  r.integer("seed", f.seed);
  r.number("extent_half_side_m", f.extent_half_side_m);
  r.number("scanner_height_m", f.scanner_height_m);
  r.number("grid_offset_x_m", f.grid_offset_x_m);
  r.number("grid_offset_y_m", f.grid_offset_y_m);
  r.integer("crown_segment_count", f.crown_segment_count);
  r.number("crown_cone_half_angle_deg", f.crown_cone_half_angle_deg);
  r.number("twig_radius_m", f.twig_radius_m);
  r.number("twig_sample_step_m", f.twig_sample_step_m);
  r.number("ground_margin_m", f.ground_margin_m);
  if (const json* sc = r.object("scanner")) {
    ObjectReader rs(*sc, "scanner");
    read_scanner(rs, s.scanner);
    rs.finish();
  }
  r.finish();
  try {
    validate(s.forest);
    validate(s.scanner);
  } catch (const Error& e) {
    fail(e.what());
  }
  return s;
}

std::string format_simulation_json(const SimulationSetup& setup) {
  const auto& f = setup.forest;
  JsonWriter w;
  w.begin_object();
  w.field("row_spacing_m", f.row_spacing_m);
  w.field("col_spacing_m", f.col_spacing_m);
  w.field("vacancy_probability", f.vacancy_probability);
  w.field("dbh_mean_cm", f.dbh_mean_cm);
  w.field("dbh_sd_cm", f.dbh_sd_cm);
  w.field("height_mean_m", f.height_mean_m);
  w.field("height_sd_m", f.height_sd_m);
  w.field("ground_tilt_deg", f.ground_tilt_deg);
  w.field("outlier_rate", f.outlier_rate);
  w.field("seed", static_cast<long long>(f.seed));
  w.field("extent_half_side_m", f.extent_half_side_m);
  w.field("scanner_height_m", f.scanner_height_m);
  w.field("grid_offset_x_m", f.grid_offset_x_m);
  w.field("grid_offset_y_m", f.grid_offset_y_m);
  w.field("crown_segment_count", f.crown_segment_count);
  w.field("crown_cone_half_angle_deg", f.crown_cone_half_angle_deg);
  w.field("twig_radius_m", f.twig_radius_m);
  w.field("twig_sample_step_m", f.twig_sample_step_m);
  w.field("ground_margin_m", f.ground_margin_m);
  w.key("scanner");
  write_scanner(w, setup.scanner);
  w.end_object();
  return w.str();
}

PipelineConfig parse_pipeline_config_json(std::string_view text) {
  const json root = parse_json(text);
  PipelineConfig c;
  ObjectReader r(root, "");
  r.number("plot_half_side_m", c.plot_half_side_m);
  r.number("cylinder_diameter_m", c.cylinder_diameter_m);
  r.number("refit_band_m", c.refit_band_m);
  r.number("top_window_m", c.top_window_m);
  r.integer("knn_k", c.knn_k);
  r.number("tilt_correct_deg", c.tilt_correct_deg);
  std::string method(to_string(c.circle_method));
  r.string("circle_method", method);
  try {
    c.circle_method = parse_circle_method(method);
  } catch (const Error&) {
    fail(r.where("circle_method") + "expected pratt, taubin or gauss_newton");
  }
  if (const json* d = r.object("detect")) {
    ObjectReader rd(*d, "detect");
    rd.number("slice_height_m", c.detect.slice_height_m);
    rd.number("slice_half_thickness_m", c.detect.slice_half_thickness_m);
    rd.number("k", c.detect.k);
    rd.number("dbh_min_m", c.detect.dbh_min_m);
    rd.number("dbh_max_m", c.detect.dbh_max_m);
    rd.integer("min_cluster_points", c.detect.min_cluster_points);
    rd.finish();
  }
  if (const json* g = r.object("ground_patch")) {
    ObjectReader rg(*g, "ground_patch");
    rg.number("patch_diameter_m", c.ground_patch.patch_diameter_m);
    rg.number("patch_thickness_m", c.ground_patch.patch_thickness_m);
    rg.finish();
  }
  if (const json* q = r.object("ransac")) {
    ObjectReader rq(*q, "ransac");
    rq.integer("iterations", c.ransac.iterations);
    rq.number("inlier_threshold_m", c.ransac.inlier_threshold_m);
    rq.integer("min_inliers", c.ransac.min_inliers);
    rq.integer("seed", c.ransac.seed);
    rq.finish();
  }
  r.finish();
  return c;
}

void write_pipeline_config(JsonWriter& w, const PipelineConfig& c) {
  w.begin_object();
  w.field("plot_half_side_m", c.plot_half_side_m);
  w.key("detect").begin_object();
  w.field("slice_height_m", c.detect.slice_height_m);
  w.field("slice_half_thickness_m", c.detect.slice_half_thickness_m);
  w.field("k", c.detect.k);
  w.field("dbh_min_m", c.detect.dbh_min_m);
  w.field("dbh_max_m", c.detect.dbh_max_m);
  w.field("min_cluster_points", c.detect.min_cluster_points);
  w.end_object();
  w.key("ground_patch").begin_object();
  w.field("patch_diameter_m", c.ground_patch.patch_diameter_m);
  w.field("patch_thickness_m", c.ground_patch.patch_thickness_m);
  w.end_object();
  w.key("ransac").begin_object();
  w.field("iterations", c.ransac.iterations);
  w.field("inlier_threshold_m", c.ransac.inlier_threshold_m);
  w.field("min_inliers", c.ransac.min_inliers);
  w.field("seed", static_cast<long long>(c.ransac.seed));
  w.end_object();
  w.field("cylinder_diameter_m", c.cylinder_diameter_m);
  w.field("refit_band_m", c.refit_band_m);
  w.field("top_window_m", c.top_window_m);
  w.field("knn_k", c.knn_k);
  w.field("tilt_correct_deg", c.tilt_correct_deg);
  w.field("circle_method", to_string(c.circle_method));
  w.end_object();
}

std::string format_truth_json(const ForestTruth& forest, std::uint64_t seed) {
  JsonWriter w;
  w.begin_object();
  w.field("seed", static_cast<long long>(seed));
  w.field("extent_half_side_m", forest.extent_half_side_m);
  w.field("scanner_height_m", forest.scanner_height_m);
  w.field("outlier_rate", forest.outlier_rate);
  w.field("stem_density", forest.stem_density());
  w.key("ground").begin_object();
  w.key("normal").begin_array().value(forest.ground.normal.x).value(forest.ground.normal.y).value(forest.ground.normal.z).end_array();
  w.field("offset_m", forest.ground.offset);
  w.end_object();
  w.key("warnings").begin_array();
  for (const auto& warning : forest.warnings) w.value(warning);
  w.end_array();
  w.key("trees").begin_array();
  for (const auto& t : forest.trees) {
    w.begin_object();
    w.field("id", t.id);
    w.field("position_x_m", t.position_x_m);
    w.field("position_y_m", t.position_y_m);
    w.field("dbh_m", t.dbh_m);
    w.field("height_m", t.height_m);
    w.field("crown_segment_count", t.crown_segment_count);
    w.field("crown_cone_half_angle_deg", t.crown_cone_half_angle_deg);
    w.key("crown").begin_array();
    for (const auto& s : t.crown) {
      w.begin_array().value(s.root.x).value(s.root.y).value(s.root.z).value(s.tip.x).value(s.tip.y).value(s.tip.z).end_array();
    }
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str();
}

std::string format_reference_csv(const ForestTruth& forest) {
  std::string out = "id,position_x_m,position_y_m,dbh_cm,height_m\n";
  for (const auto& t : forest.trees) {
    out += std::to_string(t.id) + "," + fixed6(t.position_x_m) + "," + fixed6(t.position_y_m) + "," +
           fixed6(t.dbh_m * 100.0) + "," + fixed6(t.height_m) + "\n";
  }
  return out;
}

std::vector<ReferenceTree> parse_reference_csv(std::string_view text) {
  std::vector<ReferenceTree> refs;
  std::set<int> ids;
  bool first = true;
  for (const auto& row : parse_csv_rows(text)) {
    if (first) {
      first = false;
      if (!row.fields.empty() && row.fields[0] == "id") continue;
    }
    if (row.fields.size() != 5) {
      fail("line " + std::to_string(row.line_number) + ": expected 5 fields");
    }
    ReferenceTree r;
    r.id = static_cast<int>(parse_integer(row.fields[0], row.line_number));
    r.position_x_m = parse_double(row.fields[1], row.line_number);
    r.position_y_m = parse_double(row.fields[2], row.line_number);
    r.dbh_cm = parse_double(row.fields[3], row.line_number);
    r.height_m = parse_double(row.fields[4], row.line_number);
    if (!(r.dbh_cm > 0.0) || !(r.height_m > 0.0)) {
      fail("line " + std::to_string(row.line_number) + ": measurements must be positive");
    }
    if (!ids.insert(r.id).second) fail("line " + std::to_string(row.line_number) + ": duplicate id");
    refs.push_back(r);
  }
  return refs;
}

std::string format_report_json(const PlotReport& report) {
  JsonWriter w;
  w.begin_object();
  w.key("scan").begin_object();
  w.field("file", report.scan_file);
  w.field("seed", report.scan_seed);
  w.end_object();
  w.key("config");
  write_pipeline_config(w, report.config);
  const auto& d = report.detection;
  w.key("detection").begin_object();
  w.field("coarse_ground_z_m", d.coarse_ground_z_m);
  w.field("transect_points", d.transect_points);
  w.field("clusters", d.clusters);
  w.field("too_small", d.diagnostics.too_small);
  w.field("fit_failed", d.diagnostics.fit_failed);
  w.field("gated_out", d.diagnostics.gated_out);
  w.field("outside_plot", d.outside_plot);
  w.field("duplicates", d.duplicates);
  w.field("candidates", report.candidates.size());
  w.end_object();
  w.key("trees").begin_array();
  for (const auto& t : report.trees) {
    w.begin_object();
    w.field("id", t.id);
    w.field("position_x_m", t.position_x_m);
    w.field("position_y_m", t.position_y_m);
    w.field("dbh_cm", t.dbh_cm);
    write_optional(w, "height_m", t.height_m);
    write_optional(w, "ground_inclination_deg", t.ground_inclination_deg);
    w.field("transect_point_count", t.transect_point_count);
    w.key("flags").begin_array();
    for (const auto& f : t.flags) w.value(f);
    w.end_array();
    w.field("detection_cluster_size", t.detection_cluster_size);
    w.field("arc_span_deg", t.arc_span_deg);
    write_optional(w, "breast_z_m", t.breast_z_m);
    write_optional(w, "zero_z_m", t.zero_z_m);
    w.field("ground_inliers", t.ground_inliers);
    w.field("top_window_count", t.top_window_count);
    write_optional(w, "top_md_m", t.top_md_m);
    w.field("low_confidence_count", t.low_confidence_count);
    w.end_object();
  }
  w.end_array();
  if (report.metrics) {
    w.key("metrics");
    write_metrics(w, *report.metrics);
  }
  w.end_object();
  return w.str();
}

std::vector<TreeMeasurement> parse_report_trees_json(std::string_view text) {
  const json root = parse_json(text);
  if (!root.is_object() || !root.contains("trees") || !root["trees"].is_array()) {
    fail("report: expected an object with a 'trees' array");
  }
  std::vector<TreeMeasurement> trees;
  std::size_t i = 0;
  for (const auto& t : root["trees"]) {
    if (!t.is_object()) fail("trees[" + std::to_string(i) + "]: expected an object");
    TreeMeasurement m;
    m.id = static_cast<int>(required_number(t, "id", i));
    m.position_x_m = required_number(t, "position_x_m", i);
    m.position_y_m = required_number(t, "position_y_m", i);
    m.dbh_cm = required_number(t, "dbh_cm", i);
    if (t.contains("height_m") && !t["height_m"].is_null()) m.height_m = required_number(t, "height_m", i);
    if (t.contains("flags") && t["flags"].is_array()) {
      for (const auto& f : t["flags"]) {
        if (f.is_string()) m.flags.push_back(f.get<std::string>());
      }
    }
    trees.push_back(std::move(m));
    ++i;
  }
  return trees;
}

std::string format_candidates_csv(const std::vector<TrunkCandidate>& candidates) {
  std::string out = "center_u,center_v,diameter_m,cluster_size,arc_span_deg\n";
  for (const auto& c : candidates) {
    out += fixed6(c.circle.center_u) + "," + fixed6(c.circle.center_v) + "," + fixed6(2.0 * c.circle.radius) + "," +
           std::to_string(c.cluster_size) + "," + fixed6(c.arc_span_deg) + "\n";
  }
  return out;
}

std::string format_metrics_json(const Metrics& metrics) {
  JsonWriter w;
  write_metrics(w, metrics);
  return w.str();
}

std::vector<Point2> parse_uv_csv(std::string_view text) {
  std::vector<Point2> pts;
  bool first = true;
  for (const auto& row : parse_csv_rows(text)) {
    if (first) {
      first = false;
      if (row.fields.size() == 2 && row.fields[0] == "u" && row.fields[1] == "v") continue;
    }
    if (row.fields.size() != 2) fail("line " + std::to_string(row.line_number) + ": expected 2 fields");
    pts.push_back({parse_double(row.fields[0], row.line_number), parse_double(row.fields[1], row.line_number)});
  }
  return pts;
}

std::string format_circle_json(const Circle& circle, CircleMethod method, std::size_t point_count) {
  JsonWriter w;
  w.begin_object();
  w.field("method", to_string(method));
  w.field("points", point_count);
  w.field("center_u", circle.center_u);
  w.field("center_v", circle.center_v);
  w.field("radius", circle.radius);
  w.field("diameter", 2.0 * circle.radius);
  w.end_object();
  return w.str();
}

}  // namespace tlsinv
