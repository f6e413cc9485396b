#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include <fmt/core.h>
#include <json.hpp>

#include <swarmvv/csv.hpp>
#include <swarmvv/pipeline.hpp>

#include "swarmvv_cli/cli.hpp"
#include "swarmvv_cli/stages.hpp"
#include "test_support.hpp"

using namespace swarmvv;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Shared smoke run: 3 trials of the smoke preset.
const fs::path& smoke_run() {
  static test::TempDir dir("cli_run");
  static const fs::path path = [] {
    const Outcome o = run({"all", "--preset", "smoke", "--trials", "3", "--seed", "7", "--out",
                           (dir / "run").string(), "--jobs", "2"});
    EXPECT_NE(o.code, cli::kExitError) << o.err;
    return dir / "run";
  }();
  return path;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(run({}).code, cli::kExitError);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitError);
  EXPECT_EQ(run({"check", "--model"}).code, cli::kExitError);
  EXPECT_EQ(run({"simulate", "--preset", "nope", "--out", "/tmp/never"}).code, cli::kExitError);
}

TEST(Cli, AllProducesRunDirectory) {
  const fs::path& r = smoke_run();
  for (const char* f : {"manifest.json", "results.csv", "report.txt", "properties.props", "lf/clean.csv",
                        "lf/discrete.csv", "lf/bins.json", "lf/stats.json", "models/lf_searching.ctmc",
                        "curves/lf_unsafe.csv", "curves/unsafe.svg", "curves/rewards.svg"}) {
    EXPECT_TRUE(fs::exists(r / f)) << f;
  }
  EXPECT_EQ(campaign_trial_dirs(r / "campaign").size(), 3U);
  const CsvTable results = read_csv(r / "results.csv");
  EXPECT_EQ(results.header, (std::vector<std::string>{"property_name", "kind", "value_or_bool", "details_path"}));
  EXPECT_EQ(results.rows.size(), 6U * parse_property_file(cli::default_property_pack()).size());
  const std::string report = read_text_file(r / "report.txt");
  EXPECT_NE(report.find("HF    no data"), std::string::npos);
  EXPECT_NE(report.find("PHYS  no data"), std::string::npos);
  const auto manifest = nlohmann::json::parse(read_text_file(r / "manifest.json"));
  EXPECT_EQ(manifest["command"], "all");
  EXPECT_EQ(manifest["seed"], 7);
  EXPECT_FALSE(manifest["config_hash"].get<std::string>().empty());
}

TEST(Cli, RerunAndReplayAreDeterministic) {
  const fs::path& r = smoke_run();
  test::TempDir dir("cli_rerun");
  const Outcome again = run({"all", "--preset", "smoke", "--trials", "3", "--seed", "7", "--out",
                             (dir / "again").string()});
  ASSERT_NE(again.code, cli::kExitError) << again.err;
  EXPECT_EQ(read_text_file(dir / "again" / "results.csv"), read_text_file(r / "results.csv"));
  const Outcome replay = run({"replay", "--manifest", (r / "manifest.json").string(), "--out",
                              (dir / "replay").string()});
  ASSERT_NE(replay.code, cli::kExitError) << replay.err;
  EXPECT_EQ(read_text_file(dir / "replay" / "results.csv"), read_text_file(r / "results.csv"));
}

TEST(Cli, ExistingRunDirectoryNeedsForce) {
  const fs::path& r = smoke_run();
  EXPECT_EQ(run({"all", "--preset", "smoke", "--trials", "1", "--out", r.string()}).code, cli::kExitError);
}

TEST(Cli, ViolationsGiveExitOneAndStrictStopsEarly) {
  const fs::path& r = smoke_run();
  const CsvTable results = read_csv(r / "results.csv");
  bool req1_violated = false;
  for (const auto& row : results.rows) {
    if (row[0] == "lf/searching/req1_invariant" && row[2] == "false") req1_violated = true;
  }
  if (!req1_violated) GTEST_SKIP() << "smoke campaign never entered the red zone";
  const std::string report = read_text_file(r / "report.txt");
  EXPECT_NE(report.find("VIOLATED"), std::string::npos);
  EXPECT_NE(report.find("counterexample details/"), std::string::npos);

  test::TempDir dir("cli_strict");
  const Outcome strict = run({"all", "--preset", "smoke", "--trials", "3", "--seed", "7", "--strict", "--out",
                              (dir / "s").string()});
  EXPECT_EQ(strict.code, cli::kExitViolations);
  EXPECT_TRUE(fs::exists(dir / "s" / "results.csv"));
  EXPECT_FALSE(fs::exists(dir / "s" / "report.txt"));
}

TEST(Cli, CheckWithEmptyPropertyFile) {
  const fs::path& r = smoke_run();
  test::TempDir dir("cli_check");
  write_text_file(dir / "empty.props", "// nothing\n");
  const Outcome o = run({"check", "--model", (r / "models" / "lf_searching.ctmc").string(), "--props",
                         (dir / "empty.props").string(), "--out", (dir / "res.csv").string()});
  EXPECT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_EQ(read_text_file(dir / "res.csv"), "property_name,kind,value_or_bool,details_path\n");
}

TEST(Cli, CheckReportsBindErrors) {
  const fs::path& r = smoke_run();
  test::TempDir dir("cli_check");
  write_text_file(dir / "p.props", "x: P=? [ F<=T \"nope\" ]\n");
  const Outcome o = run({"check", "--model", (r / "models" / "lf_searching.ctmc").string(), "--props",
                         (dir / "p.props").string(), "--define", "T=10"});
  EXPECT_EQ(o.code, cli::kExitError);
  EXPECT_NE(o.err.find("nope"), std::string::npos);
}

TEST(Cli, StagesByHandAndCleanVerdicts) {
  test::TempDir dir("cli_stages");
  write_text_file(dir / "clean.csv", clean_csv(test::synthetic_clean(200, {})));
  ASSERT_EQ(run({"discretize", "--clean", (dir / "clean.csv").string(), "--out", (dir / "run/lf").string()}).code, 0);
  ASSERT_EQ(run({"build-model", "--discrete", (dir / "run/lf/discrete.csv").string(), "--state", "searching",
                 "--out", (dir / "models").string()})
                .code,
            0);
  const auto model = dir / "models" / "model_searching.ctmc";
  ASSERT_TRUE(fs::exists(model));
  write_text_file(dir / "pack.props", "req1_invariant: A [ G !\"unsafe_red\" ]\nreq2_invariant: A [ G !\"density_violation\" ]\n"
                                      "fire_exit_red: P=? [ F<=T \"unsafe_red\" ]\n");
  const Outcome check = run({"check", "--model", model.string(), "--props", (dir / "pack.props").string(),
                             "--define", "T=200", "--out", (dir / "run/results.csv").string()});
  ASSERT_EQ(check.code, cli::kExitOk) << check.err;
  // results rows must carry the source prefix for the report
  std::string text = read_text_file(dir / "run/results.csv");
  std::string prefixed;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  prefixed = line + "\n";
  while (std::getline(in, line)) prefixed += "lf/searching/" + line + "\n";
  write_text_file(dir / "run/results.csv", prefixed);
  const Outcome report = run({"report", "--run", (dir / "run").string()});
  ASSERT_EQ(report.code, 0) << report.err;
  EXPECT_EQ(report.out.find("VIOLATED"), std::string::npos);
  EXPECT_NE(report.out.find("LF    SATISFIED"), std::string::npos);
}

TEST(Cli, ReportNeedsResults) {
  test::TempDir dir("cli_report");
  const Outcome o = run({"report", "--run", dir.path().string()});
  EXPECT_EQ(o.code, cli::kExitError);
  EXPECT_NE(o.err.find("results.csv"), std::string::npos);
}

TEST(Cli, ExperimentWritesSeriesAndPlot) {
  const fs::path& r = smoke_run();
  test::TempDir dir("cli_exp");
  const Outcome o = run({"experiment", "--model", (r / "models" / "lf_searching.ctmc").string(), "--prop",
                         "P=? [ F<=T \"unsafe_amber\" ]", "--sweep", "T=0:5:20", "--out", (dir / "s.csv").string(),
                         "--plot", (dir / "s.svg").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const CsvTable t = read_csv(dir / "s.csv");
  EXPECT_EQ(t.rows.size(), 5U);
  EXPECT_NE(read_text_file(dir / "s.svg").find("<svg"), std::string::npos);
  EXPECT_EQ(run({"experiment", "--model", (r / "models" / "lf_searching.ctmc").string(), "--prop",
                 "P=? [ F<=3 \"unsafe_amber\" ]", "--sweep", "T=0:5:20"})
                .code,
            cli::kExitError);
}

TEST(Cli, PhysicalAndHfIngest) {
  test::TempDir dir("cli_phys");
  std::string csv = "robot_id,t_s,x_m,y_m\n";
  for (const auto& r : test::zone_occupancy_records(200, 73, 44, 80)) {
    csv += fmt::format("{},{},{},{}\n", r.robot_id, r.t_s, r.pos.x, r.pos.y);
  }
  write_text_file(dir / "trial.csv", csv);
  const Outcome phys = run({"downsample-phys", "--input", (dir / "trial.csv").string(), "--out",
                            (dir / "phys").string()});
  ASSERT_EQ(phys.code, 0) << phys.err;
  const auto stats = nlohmann::json::parse(read_text_file(dir / "phys" / "stats.json"));
  EXPECT_EQ(stats["red_s"], 73.0);
  EXPECT_EQ(stats["amber_critical_s"], 44.0);
  EXPECT_EQ(stats["amber_single_s"], 80.0);
  EXPECT_TRUE(fs::exists(dir / "phys" / "availability.json"));
  EXPECT_TRUE(fs::exists(dir / "phys" / "positions_1hz" / "trial.csv"));
  const Outcome hf = run({"ingest-hf", "--input", (dir / "trial.csv").string(), "--out", (dir / "hf").string()});
  ASSERT_EQ(hf.code, 0) << hf.err;
  EXPECT_TRUE(fs::exists(dir / "hf" / "clean.csv"));
}

TEST(Cli, AllWithExtraSources) {
  test::TempDir dir("cli_sources");
  std::string csv = "robot_id,t_s,x_m,y_m\n";
  for (const auto& r : test::zone_occupancy_records(200, 5, 0, 10)) {
    csv += fmt::format("{},{},{},{}\n", r.robot_id, r.t_s, r.pos.x, r.pos.y);
  }
  write_text_file(dir / "t1.csv", csv);
  const Outcome o = run({"all", "--preset", "smoke", "--trials", "2", "--out", (dir / "run").string(), "--hf",
                         (dir / "t1.csv").string(), "--phys", (dir / "t1.csv").string()});
  ASSERT_NE(o.code, cli::kExitError) << o.err;
  const std::string report = read_text_file(dir / "run" / "report.txt");
  EXPECT_NE(report.find("HF    VIOLATED"), std::string::npos) << report;
  EXPECT_NE(report.find("PHYS  VIOLATED"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "run" / "models" / "hf_positions.ctmc"));
}

TEST(Cli, MacroEstimateAndEvolve) {
  const fs::path& r = smoke_run();
  test::TempDir dir("cli_macro");
  const Outcome est = run({"macro", "estimate", "--campaign", (r / "campaign").string(), "--sojourn-cap", "20",
                           "--out", (dir / "params.json").string()});
  ASSERT_EQ(est.code, 0) << est.err;
  const Outcome ev = run({"macro", "evolve", "--params", (dir / "params.json").string(), "--steps", "50", "--out",
                          (dir / "traj.csv").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_EQ(read_csv(dir / "traj.csv").rows.size(), 51U);
}

TEST(Cli, OutputRootFromEnvironment) {
  test::TempDir dir("cli_env");
  ::setenv("SWARMVV_OUT_ROOT", dir.path().c_str(), 1);
  const Outcome o = run({"simulate", "--preset", "smoke", "--trials", "1"});
  ::unsetenv("SWARMVV_OUT_ROOT");
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_TRUE(fs::exists(dir / "campaign" / "manifest.json"));
  EXPECT_EQ(campaign_trial_dirs(dir / "campaign").size(), 1U);
}
