#include "tlsinv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "tlsinv/error.hpp"
#include "tlsinv/height_est.hpp"
#include "tlsinv/parallel.hpp"

namespace tlsinv {

namespace {

constexpr double kBreastHeightM = 1.3;

std::uint64_t tree_seed(std::uint64_t seed, const Circle& c) {
  const auto qu = static_cast<std::uint64_t>(std::llround(c.center_u * 1000.0));
  const auto qv = static_cast<std::uint64_t>(std::llround(c.center_v * 1000.0));
  return derive_seed(derive_seed(seed, qu), qv);
}

void add_flag(TreeMeasurement& m, std::string_view flag) {
  if (!m.has_flag(flag)) m.flags.emplace_back(flag);
}

bool in_gate(const Circle& c, const DetectConfig& d) {
  const double dia = 2.0 * c.radius;
  return dia >= d.dbh_min_m && dia <= d.dbh_max_m;
}

std::vector<TrunkCandidate> screen_candidates(std::vector<TrunkCandidate> found, const PipelineConfig& cfg,
                                              DetectionSummary& summary) {
  const double half = cfg.plot_half_side_m;
  std::erase_if(found, [&](const TrunkCandidate& c) {
    const bool outside = std::max(std::abs(c.circle.center_u), std::abs(c.circle.center_v)) > half;
    if (outside) ++summary.outside_plot;
    return outside;
  });

  // Two clusters on one stem: keep the better supported one.
  std::vector<std::size_t> order(found.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return found[a].cluster_size > found[b].cluster_size;
  });
  const double min_sep = 0.5 * cfg.cylinder_diameter_m;
  std::vector<TrunkCandidate> kept;
  for (std::size_t idx : order) {
    const auto& c = found[idx].circle;
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](const TrunkCandidate& k) {
      return std::hypot(k.circle.center_u - c.center_u, k.circle.center_v - c.center_v) < min_sep;
    });
    if (dup) {
      ++summary.duplicates;
      continue;
    }
    kept.push_back(found[idx]);
  }
  std::sort(kept.begin(), kept.end(), [](const TrunkCandidate& a, const TrunkCandidate& b) {
    return std::tie(a.circle.center_u, a.circle.center_v) < std::tie(b.circle.center_u, b.circle.center_v);
  });
  return kept;
}

TreeMeasurement measure_tree(const PointCloud& plot, const TrunkCandidate& cand,
                             double coarse_breast_z, const PipelineConfig& cfg) {
  TreeMeasurement m;
  m.detection_cluster_size = cand.cluster_size;
  m.arc_span_deg = cand.arc_span_deg;
  m.transect_point_count = cand.cluster_size;
  const Point2 center{cand.circle.center_u, cand.circle.center_v};

  std::optional<Plane> plane;
  try {
    const auto patch = extract_ground_patch(plot, center, cfg.ground_patch);
    RansacConfig rc = cfg.ransac;
    rc.seed = tree_seed(cfg.ransac.seed, cand.circle);
    const auto fit = ransac_plane(patch, rc);
    plane = fit.plane;
    m.ground_inliers = fit.inliers.size();
    m.ground_inclination_deg = plane_inclination_deg(fit.plane);
  } catch (const Error& e) {
    add_flag(m, e.code() == ErrorCode::NoGroundData ? kFlagNoGroundData : kFlagGroundFitFailed);
  }

  double breast_z = coarse_breast_z;
  if (plane) {
    const Point3 zero = project_to_plane({center.u, center.v, coarse_breast_z}, *plane);
    if (*m.ground_inclination_deg > cfg.tilt_correct_deg) {
      breast_z = (zero + kBreastHeightM * plane->normal).z;
      add_flag(m, kFlagTiltCorrected);
    } else {
      breast_z = zero.z + kBreastHeightM;
    }
  }
  m.breast_z_m = breast_z;

  // Refined transect inside the tree cylinder, near the first-pass circle.
  const double r2 = 0.25 * cfg.cylinder_diameter_m * cfg.cylinder_diameter_m;
  std::vector<Point2> pts;
  for (const auto& p : plot.points) {
    if (std::abs(p.z - breast_z) > cfg.detect.slice_half_thickness_m) continue;
    const double du = p.x - center.u, dv = p.y - center.v;
    const double d2 = du * du + dv * dv;
    if (d2 > r2) continue;
    if (std::abs(std::sqrt(d2) - cand.circle.radius) <= cfg.refit_band_m) pts.push_back({p.x, p.y});
  }
  Circle circle = cand.circle;
  bool refined = false;
  if (pts.size() >= cfg.detect.min_cluster_points) {
    try {
      const Circle refit = fit_circle(pts, cfg.circle_method);
      if (in_gate(refit, cfg.detect)) {
        circle = refit;
        refined = true;
        m.transect_point_count = pts.size();
      }
    } catch (const Error&) {
    }
  }
  if (!refined) add_flag(m, kFlagRefitRejected);
  m.dbh_cm = 200.0 * circle.radius;

  if (!plane) {
    m.position_x_m = circle.center_u;
    m.position_y_m = circle.center_v;
    return m;
  }
  const Point3 zero = project_to_plane({circle.center_u, circle.center_v, breast_z}, *plane);
  m.position_x_m = zero.x;
  m.position_y_m = zero.y;
  m.zero_z_m = zero.z;

  try {
    const auto space = extract_cylinder(plot, {circle.center_u, circle.center_v}, cfg.cylinder_diameter_m);
    const auto window = top_window(space, cfg.top_window_m);
    m.top_window_count = window.count();
    TopPoint top{window.points.front(), window.source_indices.front()};
    if (window.count() < 2) {
      add_flag(m, kFlagTooFewPoints);
    } else {
      if (effective_k(window.count(), cfg.knn_k) < cfg.knn_k) add_flag(m, kFlagClampedKnn);
      const auto md = knn_mean_distances(window, cfg.knn_k);
      const auto cls = classify_top(window, md);
      m.top_md_m = cls.md;
      m.low_confidence_count = cls.low_confidence_points.size();
      top = uppermost(window, cls);
    }
    m.height_m = tree_height(top.point, zero);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::EmptyCylinder: add_flag(m, kFlagEmptyCylinder); break;
      case ErrorCode::InvalidHeight: add_flag(m, kFlagInvalidHeight); break;
      default: add_flag(m, to_string(e.code())); break;
    }
  }
  return m;
}

}  // namespace

bool TreeMeasurement::has_flag(std::string_view flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

void validate(const PipelineConfig& c) {
  if (!(c.plot_half_side_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "plot_half_side_m must be positive");
  validate(c.detect);
  validate(c.ground_patch);
  validate(c.ransac);
  if (!(c.cylinder_diameter_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "cylinder_diameter_m must be positive");
  if (!(c.refit_band_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "refit_band_m must be positive");
  if (!(c.top_window_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "top_window_m must be positive");
  if (c.knn_k < 1) throw Error(ErrorCode::InvalidConfig, "knn_k must be >= 1");
  if (!(c.tilt_correct_deg >= 0.0 && c.tilt_correct_deg < 90.0)) {
    throw Error(ErrorCode::InvalidConfig, "tilt_correct_deg must be in [0, 90)");
  }
}

PlotReport run_pipeline(const Scan& scan, const PipelineConfig& config, const RunOptions& options) {
  validate(config);
  if (scan.records.empty()) throw Error(ErrorCode::EmptyInput, "scan has no records");

  PlotReport report;
  report.config = config;

  const PointCloud plot = extract_square_plot(build_point_cloud(scan), config.plot_half_side_m);
  if (plot.empty()) throw Error(ErrorCode::EmptyInput, "no points inside the plot square");

  auto& summary = report.detection;
  summary.coarse_ground_z_m = coarse_ground_z(plot);
  const double coarse_breast_z = summary.coarse_ground_z_m + config.detect.slice_height_m;
  const auto transect = slice_transect(plot, coarse_breast_z, config.detect.slice_half_thickness_m);
  const auto clusters = cluster_transect(transect, scan.config, config.detect.k);
  auto detection = detect_trunks(clusters, transect, config.detect);
  summary.transect_points = transect.size();
  summary.clusters = clusters.size();
  summary.diagnostics = detection.diagnostics;
  report.candidates = screen_candidates(std::move(detection.candidates), config, summary);

  std::vector<TreeMeasurement> trees(report.candidates.size());
  parallel_for(trees.size(), options.threads, [&](std::size_t i) {
    trees[i] = measure_tree(plot, report.candidates[i], coarse_breast_z, config);
  });
  std::sort(trees.begin(), trees.end(), [](const TreeMeasurement& a, const TreeMeasurement& b) {
    return std::tie(a.position_x_m, a.position_y_m) < std::tie(b.position_x_m, b.position_y_m);
  });
  for (std::size_t i = 0; i < trees.size(); ++i) trees[i].id = static_cast<int>(i + 1);
  report.trees = std::move(trees);
  return report;
}

MatchResult match_trees(std::span<const Point2> estimates, std::span<const Point2> references,
                        double max_match_dist_m) {
  struct Pair {
    double d;
    std::size_t e, r;
  };
  std::vector<Pair> pairs;
  for (std::size_t e = 0; e < estimates.size(); ++e) {
    for (std::size_t r = 0; r < references.size(); ++r) {
      const double d = std::hypot(estimates[e].u - references[r].u, estimates[e].v - references[r].v);
      if (d <= max_match_dist_m) pairs.push_back({d, e, r});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.d, a.e, a.r) < std::tie(b.d, b.e, b.r);
  });
  std::vector<bool> used_e(estimates.size(), false), used_r(references.size(), false);
  MatchResult result;
  for (const auto& p : pairs) {
    if (used_e[p.e] || used_r[p.r]) continue;
    used_e[p.e] = used_r[p.r] = true;
    result.pairs.emplace_back(p.e, p.r);
  }
  for (std::size_t e = 0; e < estimates.size(); ++e) {
    if (!used_e[e]) result.unmatched_estimates.push_back(e);
  }
  for (std::size_t r = 0; r < references.size(); ++r) {
    if (!used_r[r]) result.unmatched_references.push_back(r);
  }
  result.correct = result.pairs.size();
  result.false_detection = result.unmatched_estimates.size();
  result.omission = result.unmatched_references.size();
  return result;
}

std::optional<QuantityMetrics> quantity_metrics(std::span<const double> estimates,
                                                std::span<const double> references) {
  if (estimates.size() != references.size()) {
    throw Error(ErrorCode::InvalidConfig, "estimates and references differ in length");
  }
  if (estimates.empty()) return std::nullopt;
  const auto n = static_cast<double>(estimates.size());
  double sum_err = 0.0, sum_sq = 0.0, sum_ref = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double err = estimates[i] - references[i];
    sum_err += err;
    sum_sq += err * err;
    sum_ref += references[i];
  }
  QuantityMetrics q;
  q.n = estimates.size();
  q.bias = sum_err / n;
  q.rmse = std::sqrt(sum_sq / n);
  q.mean_reference = sum_ref / n;
  q.bias_pct = q.bias / q.mean_reference * 100.0;
  q.rmse_pct = q.rmse / q.mean_reference * 100.0;
  return q;
}

Metrics compute_metrics(std::span<const TreeMeasurement> trees, std::span<const ReferenceTree> references,
                        const MatchResult& match) {
  Metrics m;
  m.n_reference = references.size();
  m.correct = match.correct;
  m.false_detection = match.false_detection;
  m.omission = match.omission;
  m.detection_rate = m.n_reference == 0 ? 0.0 : static_cast<double>(m.correct) / static_cast<double>(m.n_reference);

  std::vector<double> dbh_est, dbh_ref, h_est, h_ref;
  for (const auto& [e, r] : match.pairs) {
    dbh_est.push_back(trees[e].dbh_cm);
    dbh_ref.push_back(references[r].dbh_cm);
    if (trees[e].height_m) {
      h_est.push_back(*trees[e].height_m);
      h_ref.push_back(references[r].height_m);
    }
  }
  m.dbh_cm = quantity_metrics(dbh_est, dbh_ref);
  m.height_m = quantity_metrics(h_est, h_ref);
  return m;
}

Metrics evaluate_trees(std::span<const TreeMeasurement> trees, std::span<const ReferenceTree> references,
                       double max_match_dist_m) {
  std::vector<Point2> est, ref;
  for (const auto& t : trees) est.push_back({t.position_x_m, t.position_y_m});
  for (const auto& r : references) ref.push_back({r.position_x_m, r.position_y_m});
  return compute_metrics(trees, references, match_trees(est, ref, max_match_dist_m));
}

double implied_mean_reference(double value, double percent) {
  if (percent == 0.0) throw Error(ErrorCode::DegenerateInput, "percentage must be non-zero");
  return value / percent * 100.0;
}

}  // namespace tlsinv
