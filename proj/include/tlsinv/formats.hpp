#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tlsinv/circle_fit.hpp"
#include "tlsinv/pipeline.hpp"
#include "tlsinv/simulator.hpp"

namespace tlsinv {

// File formats of the command line tools. JSON inputs reject unknown keys and
// report ParseError with the offending line or key; every number written uses
// six fixed decimals.

struct SimulationSetup {
  ForestConfig forest;
  ScannerConfig scanner;
};

/// Top-level keys are ForestConfig fields plus an optional "scanner" object
/// holding ScannerConfig fields. Missing keys keep their defaults.
SimulationSetup parse_simulation_json(std::string_view text);
std::string format_simulation_json(const SimulationSetup& setup);

/// Missing keys keep their defaults. Sections: "detect", "ground_patch", "ransac".
PipelineConfig parse_pipeline_config_json(std::string_view text);
void write_pipeline_config(class JsonWriter& w, const PipelineConfig& config);

std::string format_truth_json(const ForestTruth& forest, std::uint64_t seed);

/// id,position_x_m,position_y_m,dbh_cm,height_m
std::string format_reference_csv(const ForestTruth& forest);
std::vector<ReferenceTree> parse_reference_csv(std::string_view text);

std::string format_report_json(const PlotReport& report);
/// Reads back the per-tree part of a report.
std::vector<TreeMeasurement> parse_report_trees_json(std::string_view text);

/// center_u,center_v,diameter_m,cluster_size,arc_span_deg
std::string format_candidates_csv(const std::vector<TrunkCandidate>& candidates);

std::string format_metrics_json(const Metrics& metrics);

/// u,v pairs, one per line; an optional "u,v" header line is skipped.
std::vector<Point2> parse_uv_csv(std::string_view text);
std::string format_circle_json(const Circle& circle, CircleMethod method, std::size_t point_count);

}  // namespace tlsinv
