// loscope: learning-objective analytics over course telemetry.
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loscope/cli.hpp"
#include "loscope/io.hpp"

namespace {

struct Flag {
  const char* name;
  const char* help;
};

constexpr Flag kFlags[] = {
    {"course", "course structure JSON"},
    {"tags", "LO tag CSV (module_id,lo_codes,bloom_level)"},
    {"lo-registry", "LO registry CSV"},
    {"grades", "subsection grade CSV"},
    {"final-grades", "final grade CSV"},
    {"week-overrides", "chapter week override CSV"},
    {"exclude-learners", "file of learner ids to drop"},
    {"out", "output directory (default: out)"},
    {"break-seconds", "session break threshold in seconds (default: 600)"},
    {"pass-threshold", "fallback pass threshold in [0,1] (default: 0.60)"},
    {"terminal-dwell", "dwell for the last event of a session: zero | cap"},
    {"segments", "comma list of all, passed, not_passed (default: all)"},
    {"seed", "synth seed override"},
    {"threads", "worker threads, 0 = all cores (default: 1)"},
    {"spec", "synth cohort spec JSON"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-objective engagement and performance analytics"};
  app.require_subcommand(1);
  app.fallthrough();

  std::map<std::string, std::string> values;
  for (const auto& f : kFlags) app.add_option(std::string("--") + f.name, values[f.name], f.help);
  std::vector<std::string> events;
  app.add_option("--events", events, "event log files, directories or globs (repeatable)");
  std::string config_path;
  app.add_option("--config", config_path, "key = value config file; flags win");
  bool spearman = false;
  app.add_flag("--spearman", spearman, "also report Spearman rank correlation");

  auto* validate = app.add_subcommand("validate", "check inputs; exit 1 on findings");
  auto* analyze = app.add_subcommand("analyze", "run the pipeline and write result tables");
  auto* report = app.add_subcommand("report", "render charts and index.html from tables");
  auto* synth = app.add_subcommand("synth", "write a synthetic cohort fixture");
  auto* all = app.add_subcommand("all", "analyze then report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : loscope::cli::kExitFatal;
  }

  loscope::cli::Log log(std::cerr);
  loscope::cli::RunConfig config;
  try {
    if (!config_path.empty()) {
      loscope::cli::apply_config_file(config, loscope::io::read_file(config_path));
    }
    for (const auto& f : kFlags) {
      if (app.count(std::string("--") + f.name) > 0) loscope::cli::set_option(config, f.name, values[f.name]);
    }
    if (!events.empty()) config.events = events;
    if (app.count("--spearman") > 0) config.spearman = spearman;
  } catch (const std::exception& e) {
    log.event("error", "config", {{"message", e.what()}});
    return loscope::cli::kExitFatal;
  }

  if (*validate) return loscope::cli::cmd_validate(config, log);
  if (*analyze) return loscope::cli::cmd_analyze(config, log);
  if (*report) return loscope::cli::cmd_report(config, log);
  if (*synth) return loscope::cli::cmd_synth(config, log, std::cout);
  if (*all) return loscope::cli::cmd_all(config, log);
  return loscope::cli::kExitFatal;
}
