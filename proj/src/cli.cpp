#include "tlsinv/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tlsinv/error.hpp"
#include "tlsinv/formats.hpp"
#include "tlsinv/io.hpp"
#include "tlsinv/pipeline.hpp"
#include "tlsinv/simulator.hpp"

namespace tlsinv {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PipelineFlags {
  std::string config_path;
  std::optional<double> dbh_min;
  std::optional<double> dbh_max;
  std::optional<int> ransac_iters;
  std::optional<double> ransac_thresh;
  std::optional<double> tilt_correct_deg;
  std::optional<std::string> circle_method;
  int threads = 0;
};

void add_pipeline_flags(CLI::App* app, PipelineFlags& f) {
  app->add_option("--config", f.config_path, "PipelineConfig JSON");
  app->add_option("--dbh-min", f.dbh_min, "lower diameter gate in meters");
  app->add_option("--dbh-max", f.dbh_max, "upper diameter gate in meters");
  app->add_option("--ransac-iters", f.ransac_iters, "RANSAC iterations");
  app->add_option("--ransac-thresh", f.ransac_thresh, "RANSAC inlier threshold in meters");
  app->add_option("--tilt-correct-deg", f.tilt_correct_deg, "inclination above which breast height follows the normal");
  app->add_option("--circle-method", f.circle_method, "pratt, taubin or gauss_newton");
  app->add_option("--threads", f.threads, "worker threads, 0 = all cores");
}

bool config_has_gate(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return false;
  const auto d = j.find("detect");
  return d != j.end() && d->is_object() && d->contains("dbh_min_m") && d->contains("dbh_max_m");
}

PipelineConfig resolve_pipeline_config(const PipelineFlags& f) {
  PipelineConfig cfg;
  bool gate_in_file = false;
  if (!f.config_path.empty()) {
    const std::string text = read_text_file(f.config_path);
    cfg = parse_pipeline_config_json(text);
    gate_in_file = config_has_gate(text);
  }
  if (!gate_in_file && !(f.dbh_min && f.dbh_max)) {
    throw UsageError("the diameter gate is required: pass --dbh-min and --dbh-max or set detect.dbh_min_m/dbh_max_m");
  }
  if (f.dbh_min) cfg.detect.dbh_min_m = *f.dbh_min;
  if (f.dbh_max) cfg.detect.dbh_max_m = *f.dbh_max;
  if (f.ransac_iters) cfg.ransac.iterations = *f.ransac_iters;
  if (f.ransac_thresh) cfg.ransac.inlier_threshold_m = *f.ransac_thresh;
  if (f.tilt_correct_deg) cfg.tilt_correct_deg = *f.tilt_correct_deg;
  if (f.circle_method) {
    try {
      cfg.circle_method = parse_circle_method(*f.circle_method);
    } catch (const Error&) {
      throw UsageError("--circle-method must be pratt, taubin or gauss_newton");
    }
  }
  validate(cfg);
  return cfg;
}

std::string seed_of(const ScanFile& file) {
  const auto it = file.metadata.find("seed");
  return it == file.metadata.end() ? std::string() : it->second;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Terrestrial laser scan inventory: simulate plots, detect trunks, measure DBH and height.", "tlsinv"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a forest plot and scan it");
  std::string sim_config, sim_scan, sim_truth, sim_reference;
  std::optional<std::uint64_t> sim_seed;
  int sim_threads = 0;
  sim->add_option("--config", sim_config, "forest/scanner JSON (defaults if omitted)");
  sim->add_option("--seed", sim_seed, "overrides the seed of the config");
  sim->add_option("--scan", sim_scan, "output scan CSV")->required();
  sim->add_option("--truth", sim_truth, "output truth JSON")->required();
  sim->add_option("--reference", sim_reference, "output reference tree CSV");
  sim->add_option("--threads", sim_threads, "worker threads, 0 = all cores");

  // process
  auto* proc = app.add_subcommand("process", "measure every tree of a scan");
  std::string proc_scan, proc_report, proc_candidates, proc_reference;
  PipelineFlags proc_flags;
  proc->add_option("--scan", proc_scan, "input scan CSV")->required();
  proc->add_option("--report", proc_report, "output report JSON")->required();
  proc->add_option("--candidates", proc_candidates, "output candidate CSV");
  proc->add_option("--reference", proc_reference, "reference CSV; adds metrics to the report");
  add_pipeline_flags(proc, proc_flags);

  // detect
  auto* det = app.add_subcommand("detect", "breast-height trunk candidates only");
  std::string det_scan, det_candidates;
  PipelineFlags det_flags;
  det->add_option("--scan", det_scan, "input scan CSV")->required();
  det->add_option("--candidates", det_candidates, "output candidate CSV")->required();
  add_pipeline_flags(det, det_flags);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "compare a report with reference trees");
  std::string eval_report, eval_reference, eval_out;
  double eval_max_dist = 0.5;
  eval->add_option("--report", eval_report, "report JSON")->required();
  eval->add_option("--reference", eval_reference, "reference CSV")->required();
  eval->add_option("--out", eval_out, "output metrics JSON")->required();
  eval->add_option("--max-match-dist", eval_max_dist, "matching radius in meters");

  // maps
  auto* maps = app.add_subcommand("maps", "render cylindrical range and intensity maps");
  std::string maps_scan, maps_range, maps_intensity;
  maps->add_option("--scan", maps_scan, "input scan CSV")->required();
  maps->add_option("--range", maps_range, "output range PGM")->required();
  maps->add_option("--intensity", maps_intensity, "output intensity PGM")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "fit a circle to u,v points");
  std::string fit_input, fit_out, fit_method = "pratt";
  fit->add_option("--input", fit_input, "u,v CSV")->required();
  fit->add_option("--method", fit_method, "pratt, taubin or gauss_newton");
  fit->add_option("--out", fit_out, "output circle JSON (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*sim) {
      SimulationSetup setup;
      if (!sim_config.empty()) setup = parse_simulation_json(read_text_file(sim_config));
      const std::uint64_t seed = sim_seed.value_or(setup.forest.seed);
      const ForestTruth forest = generate_forest(setup.forest, seed);
      for (const auto& w : validate(setup.scanner)) err << "warning: " << w << "\n";
      for (const auto& w : forest.warnings) err << "warning: " << w << "\n";
      const Scan scan = simulate_scan(forest, setup.scanner, seed, {sim_threads});
      write_scan_csv(sim_scan, scan, {{"seed", std::to_string(seed)}});
      write_text_file(sim_truth, format_truth_json(forest, seed));
      if (!sim_reference.empty()) write_text_file(sim_reference, format_reference_csv(forest));
      out << "simulated " << forest.trees.size() << " trees, " << scan.records.size() << " records\n";
    } else if (*proc) {
      const PipelineConfig cfg = resolve_pipeline_config(proc_flags);
      const ScanFile file = read_scan_csv(proc_scan);
      PlotReport report = run_pipeline(file.scan, cfg, {proc_flags.threads});
      report.scan_file = fs::path(proc_scan).filename().string();
      report.scan_seed = seed_of(file);
      if (!proc_reference.empty()) {
        const auto refs = parse_reference_csv(read_text_file(proc_reference));
        report.metrics = evaluate_trees(report.trees, refs);
      }
      write_text_file(proc_report, format_report_json(report));
      if (!proc_candidates.empty()) write_text_file(proc_candidates, format_candidates_csv(report.candidates));
      out << "measured " << report.trees.size() << " trees\n";
    } else if (*det) {
      const PipelineConfig cfg = resolve_pipeline_config(det_flags);
      const ScanFile file = read_scan_csv(det_scan);
      if (file.scan.records.empty()) throw Error(ErrorCode::EmptyInput, "scan has no records");
      const PointCloud plot = extract_square_plot(build_point_cloud(file.scan), cfg.plot_half_side_m);
      const double z = coarse_ground_z(plot) + cfg.detect.slice_height_m;
      const auto transect = slice_transect(plot, z, cfg.detect.slice_half_thickness_m);
      const auto clusters = cluster_transect(transect, file.scan.config, cfg.detect.k);
      const auto found = detect_trunks(clusters, transect, cfg.detect);
      write_text_file(det_candidates, format_candidates_csv(found.candidates));
      out << "detected " << found.candidates.size() << " candidates\n";
    } else if (*eval) {
      const auto trees = parse_report_trees_json(read_text_file(eval_report));
      const auto refs = parse_reference_csv(read_text_file(eval_reference));
      const Metrics metrics = evaluate_trees(trees, refs, eval_max_dist);
      write_text_file(eval_out, format_metrics_json(metrics));
      out << "correct " << metrics.correct << " of " << metrics.n_reference << ", false " << metrics.false_detection
          << "\n";
    } else if (*maps) {
      const ScanFile file = read_scan_csv(maps_scan);
      if (file.scan.records.empty()) throw Error(ErrorCode::EmptyInput, "scan has no records");
      write_pgm(maps_range, render_cylindrical_map(file.scan, MapMode::Range));
      write_pgm(maps_intensity, render_cylindrical_map(file.scan, MapMode::Intensity));
    } else if (*fit) {
      CircleMethod method;
      try {
        method = parse_circle_method(fit_method);
      } catch (const Error&) {
        throw UsageError("--method must be pratt, taubin or gauss_newton");
      }
      const auto points = parse_uv_csv(read_text_file(fit_input));
      const std::string text = format_circle_json(fit_circle(points, method), method, points.size());
      if (fit_out.empty()) {
        out << text;
      } else {
        write_text_file(fit_out, text);
      }
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace tlsinv
