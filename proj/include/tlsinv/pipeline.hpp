#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tlsinv/circle_fit.hpp"
#include "tlsinv/ground_fit.hpp"
#include "tlsinv/scan.hpp"
#include "tlsinv/trunk_detect.hpp"

namespace tlsinv {

struct PipelineConfig {
  double plot_half_side_m = 5.0;
  DetectConfig detect;
  GroundPatchConfig ground_patch;
  RansacConfig ransac;
  double cylinder_diameter_m = 0.8;
  // Refit keeps slice points within this distance of the first-pass circle.
  double refit_band_m = 0.1;
  double top_window_m = 0.5;
  std::size_t knn_k = 10;
  double tilt_correct_deg = 6.0;
  CircleMethod circle_method = CircleMethod::Pratt;
};

void validate(const PipelineConfig& config);

// Per-tree flag names written to reports.
inline constexpr const char* kFlagNoGroundData = "NoGroundData";
inline constexpr const char* kFlagGroundFitFailed = "GroundFitFailed";
inline constexpr const char* kFlagRefitRejected = "RefitRejected";
inline constexpr const char* kFlagTiltCorrected = "TiltCorrected";
inline constexpr const char* kFlagEmptyCylinder = "EmptyCylinder";
inline constexpr const char* kFlagTooFewPoints = "TooFewPoints";
inline constexpr const char* kFlagClampedKnn = "ClampedKnn";
inline constexpr const char* kFlagInvalidHeight = "InvalidHeight";

struct TreeMeasurement {
  int id = 0;
  double position_x_m = 0.0;  // p_zero, or the trunk center when no ground was found
  double position_y_m = 0.0;
  double dbh_cm = 0.0;
  std::optional<double> height_m;
  std::optional<double> ground_inclination_deg;
  std::size_t transect_point_count = 0;
  std::vector<std::string> flags;

  // Diagnostics.
  std::size_t detection_cluster_size = 0;
  double arc_span_deg = 0.0;
  std::optional<double> breast_z_m;
  std::optional<double> zero_z_m;
  std::size_t ground_inliers = 0;
  std::size_t top_window_count = 0;
  std::optional<double> top_md_m;
  std::size_t low_confidence_count = 0;

  bool has_flag(std::string_view flag) const;
};

struct ReferenceTree {
  int id = 0;
  double position_x_m = 0.0;
  double position_y_m = 0.0;
  double dbh_cm = 0.0;
  double height_m = 0.0;
};

struct QuantityMetrics {
  std::size_t n = 0;
  double bias = 0.0;
  double bias_pct = 0.0;
  double rmse = 0.0;
  double rmse_pct = 0.0;
  double mean_reference = 0.0;
};

struct Metrics {
  std::optional<QuantityMetrics> dbh_cm;
  std::optional<QuantityMetrics> height_m;
  std::size_t n_reference = 0;
  std::size_t correct = 0;
  std::size_t false_detection = 0;
  std::size_t omission = 0;
  double detection_rate = 0.0;
};

struct DetectionSummary {
  std::size_t transect_points = 0;
  std::size_t clusters = 0;
  DetectDiagnostics diagnostics;
  std::size_t outside_plot = 0;
  std::size_t duplicates = 0;
  double coarse_ground_z_m = 0.0;
};

struct PlotReport {
  PipelineConfig config;
  std::string scan_file;
  std::string scan_seed;
  DetectionSummary detection;
  std::vector<TrunkCandidate> candidates;  // first-pass detections kept for measurement
  std::vector<TreeMeasurement> trees;      // sorted by (x, y), ids 1..n
  std::optional<Metrics> metrics;
};

struct RunOptions {
  int threads = 0;
};

/// Full plot flow: cloud, plot square, coarse ground, breast transect,
/// clustering, detection, then per tree: ground patch, RANSAC plane, refined
/// breast slice, final circle, p_zero, cylinder, top window, KNN filter, height.
/// Per-tree failures become flags. Throws EmptyInput for an empty scan.
PlotReport run_pipeline(const Scan& scan, const PipelineConfig& config, const RunOptions& options = {});

struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (estimate, reference), by increasing distance
  std::vector<std::size_t> unmatched_estimates;
  std::vector<std::size_t> unmatched_references;
  std::size_t correct = 0;
  std::size_t false_detection = 0;
  std::size_t omission = 0;
};

/// Greedy matching in increasing distance order; ties by (estimate, reference)
/// index. Pairs farther than max_match_dist_m are never matched.
MatchResult match_trees(std::span<const Point2> estimates, std::span<const Point2> references,
                        double max_match_dist_m = 0.5);

/// bias = mean(est - ref), rmse = sqrt(mean((est - ref)^2)), percentages over
/// the mean reference value. Empty input gives no metrics.
std::optional<QuantityMetrics> quantity_metrics(std::span<const double> estimates, std::span<const double> references);

Metrics compute_metrics(std::span<const TreeMeasurement> trees, std::span<const ReferenceTree> references,
                        const MatchResult& match);

Metrics evaluate_trees(std::span<const TreeMeasurement> trees, std::span<const ReferenceTree> references,
                       double max_match_dist_m = 0.5);

/// Mean reference value implied by a statistic and its percentage form.
double implied_mean_reference(double value, double percent);

}  // namespace tlsinv
