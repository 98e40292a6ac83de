#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "loscope/analytics.hpp"
#include "loscope/error.hpp"
#include "loscope/event_pipeline.hpp"
#include "loscope/grading.hpp"

namespace loscope::cli {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::string course;
  std::vector<std::string> events;  // paths, directories or glob patterns
  std::string tags;
  std::string lo_registry;
  std::string grades;
  std::string final_grades;
  std::string week_overrides;
  std::string exclude_learners;
  std::string out = "out";
  std::string spec;  // synth only

  double break_seconds = 600;
  double pass_threshold = kDefaultPassThreshold;
  TerminalDwell terminal_dwell = TerminalDwell::kZero;
  std::vector<Segment> segments = {Segment::kAll};
  std::optional<std::uint64_t> seed;  // overrides the synth spec seed
  unsigned threads = 1;               // 0 = hardware concurrency
  bool spearman = false;

  // Throws ConfigError.
  void validate() const;
  unsigned effective_threads() const;
};

// Applies one setting by key ("break-seconds" and "break_seconds" are the
// same key). Throws ConfigError on an unknown key or unparseable value.
void set_option(RunConfig& config, std::string_view key, std::string_view value);

// TOML-style "key = value" lines; '#' starts a comment; values may be
// double-quoted. Throws ConfigError with the line number.
void apply_config_file(RunConfig& config, std::string_view text);

// Canonical key=value rendering, sorted by key. Omits out and threads so the
// echo is identical across output directories and thread counts.
std::string config_used(const RunConfig& config);

// One line per event on the log stream: "loscope level=info event=<name> k=v ...".
class Log {
 public:
  explicit Log(std::ostream& out) : out_(out) {}
  void event(std::string_view level, std::string_view name,
             const std::vector<std::pair<std::string, std::string>>& fields = {});

 private:
  std::ostream& out_;
};

enum ExitCode : int { kExitOk = 0, kExitFindings = 1, kExitFatal = 2 };

// Each command returns its exit status and logs errors instead of throwing.
int cmd_validate(const RunConfig& config, Log& log);
int cmd_analyze(const RunConfig& config, Log& log);
int cmd_report(const RunConfig& config, Log& log);
// Prints the realized correlation and the file manifest to `out`.
int cmd_synth(const RunConfig& config, Log& log, std::ostream& out);
// analyze then report.
int cmd_all(const RunConfig& config, Log& log);

inline constexpr const char* kConfigUsedFile = "config_used.txt";

}  // namespace loscope::cli
