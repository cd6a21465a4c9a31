#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tlsinv/cli.hpp"
#include "tlsinv/formats.hpp"
#include "tlsinv/io.hpp"

using namespace tlsinv;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "tlsinv");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("tlsinv_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // A small, fast scene.
  std::string small_config() {
    SimulationSetup setup;
    setup.scanner.vertical_step_deg = 0.5;
    setup.scanner.horizontal_step_deg = 0.25;
    setup.forest.outlier_rate = 0.001;
    write_text_file(path("forest.json"), format_simulation_json(setup));
    return path("forest.json");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SimulateIsDeterministic) {
  const std::string cfg = small_config();
  ASSERT_EQ(run({"simulate", "--config", cfg, "--seed", "42", "--scan", path("a.csv"), "--truth", path("a.json"),
                 "--reference", path("a_ref.csv")})
                .code,
            kExitOk);
  ASSERT_EQ(run({"simulate", "--config", cfg, "--seed", "42", "--scan", path("b.csv"), "--truth", path("b.json"),
                 "--reference", path("b_ref.csv"), "--threads", "3"})
                .code,
            kExitOk);
  EXPECT_EQ(read_text_file(path("a.csv")), read_text_file(path("b.csv")));
  EXPECT_EQ(read_text_file(path("a.json")), read_text_file(path("b.json")));
  EXPECT_EQ(read_text_file(path("a_ref.csv")), read_text_file(path("b_ref.csv")));

  const auto truth = nlohmann::json::parse(read_text_file(path("a.json")));
  EXPECT_EQ(truth["seed"], 42);
  const auto refs = parse_reference_csv(read_text_file(path("a_ref.csv")));
  EXPECT_EQ(refs.size(), truth["trees"].size());
  EXPECT_EQ(read_scan_csv(path("a.csv")).metadata.at("seed"), "42");
}

TEST_F(CliTest, UnknownFlagIsUsageError) {
  const CliRun r = run({"simulate", "--scan", path("s.csv"), "--truth", path("t.json"), "--bogus"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST_F(CliTest, ProcessRequiresDiameterGate) {
  const std::string cfg = small_config();
  ASSERT_EQ(run({"simulate", "--config", cfg, "--scan", path("s.csv"), "--truth", path("t.json")}).code, kExitOk);
  const CliRun r = run({"process", "--scan", path("s.csv"), "--report", path("r.json")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("dbh"), std::string::npos);
}

TEST_F(CliTest, MalformedScanIsDataErrorWithLine) {
  write_text_file(path("bad.csv"), "# vertical_step_deg=0.25\nline_index,beam_index,elevation_deg,azimuth_deg,range_m,intensity\n0,0,0.0,0.0,abc,1\n");
  const CliRun r = run({"detect", "--scan", path("bad.csv"), "--candidates", path("c.csv"), "--dbh-min", "0.05",
                     "--dbh-max", "0.3"});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
  EXPECT_EQ(run({"detect", "--scan", path("missing.csv"), "--candidates", path("c.csv"), "--dbh-min", "0.05",
                 "--dbh-max", "0.3"})
                .code,
            kExitData);
}

TEST_F(CliTest, FitSubcommand) {
  write_text_file(path("uv.csv"), "u,v\n4,2\n1,5\n-2,2\n1,-1\n");
  const CliRun r = run({"fit", "--input", path("uv.csv"), "--method", "taubin"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["method"], "taubin");
  EXPECT_EQ(j["points"], 4);
  EXPECT_NEAR(j["center_u"].get<double>(), 1.0, 1e-6);
  EXPECT_NEAR(j["center_v"].get<double>(), 2.0, 1e-6);
  EXPECT_NEAR(j["radius"].get<double>(), 3.0, 1e-6);
  EXPECT_NEAR(j["diameter"].get<double>(), 6.0, 1e-6);

  write_text_file(path("line.csv"), "0,0\n1,1\n2,2\n");
  EXPECT_EQ(run({"fit", "--input", path("line.csv")}).code, kExitData);
  EXPECT_EQ(run({"fit", "--input", path("uv.csv"), "--method", "kasa"}).code, kExitUsage);
}

TEST_F(CliTest, MapsSubcommand) {
  const std::string cfg = small_config();
  ASSERT_EQ(run({"simulate", "--config", cfg, "--scan", path("s.csv"), "--truth", path("t.json")}).code, kExitOk);
  ASSERT_EQ(run({"maps", "--scan", path("s.csv"), "--range", path("r.pgm"), "--intensity", path("i.pgm")}).code,
            kExitOk);
  const std::string pgm = read_text_file(path("r.pgm"));
  EXPECT_EQ(pgm.substr(0, 14), "P5\n1440 381\n25");
  EXPECT_EQ(pgm.size(), read_text_file(path("i.pgm")).size());
}

TEST_F(CliTest, DemoProcessAndEvaluate) {
  const std::string data = TLSINV_DATA_DIR;
  ASSERT_EQ(run({"simulate", "--config", data + "/demo_forest.json", "--scan", path("demo.csv"), "--truth",
                 path("demo_truth.json"), "--reference", path("demo_ref.csv")})
                .code,
            kExitOk);
  const CliRun p = run({"process", "--scan", path("demo.csv"), "--config", data + "/demo_pipeline.json", "--report",
                     path("report.json"), "--candidates", path("cand.csv")});
  ASSERT_EQ(p.code, kExitOk) << p.err;
  const auto report = nlohmann::json::parse(read_text_file(path("report.json")));
  EXPECT_EQ(report["trees"].size(), 16u);
  EXPECT_EQ(report["scan"]["file"], "demo.csv");
  EXPECT_EQ(parse_report_trees_json(read_text_file(path("report.json"))).size(), 16u);

  const CliRun e = run({"evaluate", "--report", path("report.json"), "--reference", path("demo_ref.csv"), "--out",
                     path("metrics.json")});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  const auto metrics = nlohmann::json::parse(read_text_file(path("metrics.json")));
  EXPECT_EQ(metrics["correct"], 16);
  EXPECT_EQ(metrics["false_detection"], 0);
  EXPECT_EQ(metrics["omission"], 0);
}

TEST_F(CliTest, ConfigRejectsUnknownKeys) {
  write_text_file(path("cfg.json"), "{\n  \"detect\": {\"dbh_min_m\": 0.05, \"dbh_max_m\": 0.3, \"kk\": 2}\n}\n");
  write_text_file(path("s.csv"), format_scan_csv(Scan{}));
  const CliRun r = run({"process", "--scan", path("s.csv"), "--config", path("cfg.json"), "--report", path("r.json")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("kk"), std::string::npos) << r.err;
}
