#include "loscope/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "loscope/io.hpp"
#include "loscope/report.hpp"
#include "loscope/synthgen.hpp"

namespace loscope::cli {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("loscope_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig fixture_config(const fs::path& fx, const fs::path& out) {
  RunConfig c;
  c.course = (fx / "course.json").string();
  c.tags = (fx / "tags.csv").string();
  c.lo_registry = (fx / "lo_registry.csv").string();
  c.grades = (fx / "subsection_grades.csv").string();
  c.final_grades = (fx / "final_grades.csv").string();
  c.week_overrides = (fx / "week_overrides.csv").string();
  c.exclude_learners = (fx / "exclusions.txt").string();
  c.events = {(fx / "events").string()};
  c.out = out.string();
  return c;
}

synth::CohortSpec small_spec() {
  synth::CohortSpec s;
  s.n_learners = 40;
  s.activities_total = 120;
  s.lo_count = 12;
  s.events_per_learner = 20;
  s.staff_learners = 2;
  return s;
}

TEST(ConfigTest, FileThenFlags) {
  RunConfig c;
  apply_config_file(c,
                    "# run settings\n"
                    "course = \"c.json\"\n"
                    "break_seconds = 900   # fifteen minutes\n"
                    "segments = all, passed\n"
                    "terminal-dwell = cap\n"
                    "events = a.ndjson,b/*.ndjson\n");
  EXPECT_EQ(c.course, "c.json");
  EXPECT_EQ(c.break_seconds, 900);
  EXPECT_EQ(c.segments, (std::vector<Segment>{Segment::kAll, Segment::kPassed}));
  EXPECT_EQ(c.terminal_dwell, TerminalDwell::kCap);
  EXPECT_EQ(c.events, (std::vector<std::string>{"a.ndjson", "b/*.ndjson"}));
  set_option(c, "break-seconds", "300");  // a flag applied after the file wins
  EXPECT_EQ(c.break_seconds, 300);

  EXPECT_THROW(apply_config_file(c, "colour = red\n"), ConfigError);
  EXPECT_THROW(apply_config_file(c, "just words\n"), ConfigError);
  EXPECT_THROW(set_option(c, "segments", "everyone"), ConfigError);
  EXPECT_THROW(set_option(c, "threads", "-1"), ConfigError);
}

TEST(ConfigTest, Invariants) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  c.break_seconds = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.break_seconds = 600;
  c.pass_threshold = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ConfigTest, ConfigUsedRoundTripsAndIgnoresOutAndThreads) {
  RunConfig a;
  a.course = "c.json";
  a.events = {"e1", "e2"};
  a.segments = {Segment::kAll, Segment::kNotPassed};
  a.break_seconds = 450.5;
  RunConfig b = a;
  b.out = "elsewhere";
  b.threads = 8;
  EXPECT_EQ(config_used(a), config_used(b));
  RunConfig back;
  apply_config_file(back, config_used(a));
  EXPECT_EQ(config_used(back), config_used(a));
}

TEST(LogTest, OneLinePerEvent) {
  std::ostringstream s;
  Log log(s);
  log.event("warn", "finding", {{"kind", "untagged_leaves"}, {"message", "two words"}});
  EXPECT_EQ(s.str(), "loscope level=warn event=finding kind=untagged_leaves message=\"two words\"\n");
}

TEST(CommandTest, ValidateExitCodes) {
  const auto root = temp_dir("validate");
  synth::write_fixture(small_spec(), root / "clean");
  auto defect = small_spec();
  defect.defects.untagged_leaves = 3;
  synth::write_fixture(defect, root / "untagged");

  std::ostringstream sink;
  Log log(sink);
  EXPECT_EQ(cmd_validate(fixture_config(root / "clean", root / "o1"), log), kExitOk) << sink.str();
  EXPECT_EQ(cmd_validate(fixture_config(root / "untagged", root / "o2"), log), kExitFindings);
  const auto d = nlohmann::json::parse(io::read_file(root / "o2" / "diagnostics.json"));
  ASSERT_EQ(d["findings"].size(), 1u);
  EXPECT_EQ(d["findings"][0]["kind"], "untagged_leaves");
  EXPECT_EQ(d["findings"][0]["count"], 3);

  auto missing = fixture_config(root / "clean", root / "o3");
  missing.course = (root / "nope.json").string();
  EXPECT_EQ(cmd_validate(missing, log), kExitFatal);
  missing.course.clear();
  EXPECT_EQ(cmd_validate(missing, log), kExitFatal);
}

TEST(CommandTest, AnalyzeReportRerunIsByteIdentical) {
  const auto root = temp_dir("analyze");
  synth::write_fixture(small_spec(), root / "fx");
  std::ostringstream sink;
  Log log(sink);
  auto c1 = fixture_config(root / "fx", root / "a");
  auto c2 = fixture_config(root / "fx", root / "b");
  c2.threads = 3;
  ASSERT_EQ(cmd_all(c1, log), kExitOk) << sink.str();
  ASSERT_EQ(cmd_all(c2, log), kExitOk) << sink.str();
  const auto m1 = io::read_file(root / "a" / "manifest.json");
  EXPECT_EQ(m1, io::read_file(root / "b" / "manifest.json"));
  EXPECT_NE(m1.find("charts/grade_box.svg"), std::string::npos);
  EXPECT_NE(m1.find("index.html"), std::string::npos);
  EXPECT_NE(m1.find("config_used.txt"), std::string::npos);

  ASSERT_EQ(cmd_report(c1, log), kExitOk);
  EXPECT_EQ(io::read_file(root / "a" / "manifest.json"), m1);
}

TEST(CommandTest, EmptyEventLogStillWritesTables) {
  const auto root = temp_dir("empty");
  synth::write_fixture(small_spec(), root / "fx");
  io::write_file(root / "empty.ndjson", "");
  auto c = fixture_config(root / "fx", root / "out");
  c.events = {(root / "empty.ndjson").string()};
  std::ostringstream sink;
  Log log(sink);
  EXPECT_EQ(cmd_analyze(c, log), kExitOk);
  EXPECT_NE(sink.str().find("event=no_events"), std::string::npos);
  EXPECT_TRUE(fs::exists(root / "out" / report::TableFiles::kLoDwell));
}

TEST(CommandTest, ReportWithoutTablesIsFatal) {
  RunConfig c;
  c.out = temp_dir("no_tables").string();
  std::ostringstream sink;
  Log log(sink);
  EXPECT_EQ(cmd_report(c, log), kExitFatal);
}

TEST(CommandTest, SynthSpecErrorsExitOne) {
  const auto root = temp_dir("synth");
  io::write_file(root / "bad.json", "{\"planted_rho\": 2}");
  RunConfig c;
  c.spec = (root / "bad.json").string();
  c.out = (root / "fx").string();
  std::ostringstream sink, out;
  Log log(sink);
  EXPECT_EQ(cmd_synth(c, log, out), kExitFindings);

  io::write_file(root / "ok.json", "{\"n_learners\": 30, \"activities_total\": 60, \"lo_count\": 6}");
  c.spec = (root / "ok.json").string();
  c.seed = 7;
  EXPECT_EQ(cmd_synth(c, log, out), kExitOk) << sink.str();
  EXPECT_EQ(out.str().rfind("realized_r ", 0), 0u);
  const auto truth = nlohmann::json::parse(io::read_file(root / "fx" / "ground_truth.json"));
  EXPECT_EQ(truth["n"], 30);
}

}  // namespace
}  // namespace loscope::cli
