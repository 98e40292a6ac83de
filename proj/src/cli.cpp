#include "loscope/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <map>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "loscope/course_model.hpp"
#include "loscope/io.hpp"
#include "loscope/report.hpp"
#include "loscope/synthgen.hpp"
#include "loscope/taxonomy.hpp"
#include "loscope/text.hpp"

namespace loscope::cli {
namespace {

namespace fs = std::filesystem;

std::string normalize_key(std::string_view key) {
  std::string k(trim(key));
  std::replace(k.begin(), k.end(), '_', '-');
  return k;
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view key, std::string_view value) {
  const auto v = parse_double(value);
  if (!v) throw ConfigError(std::string(key) + ": not a number: " + std::string(value));
  return *v;
}

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  for (const auto& part : split(value, ',')) {
    const auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::string elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::to_string(std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count());
}

const std::string& require(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string("missing required --") + flag);
  return path;
}

// Everything validate and analyze read from disk.
struct Inputs {
  CourseTree tree;
  LoRegistry registry;
  TagLoad tags;
  std::optional<SubsectionLoad> grades;
  ZeroPossibleFilter filtered;
  std::set<std::string> graded;
  std::optional<FinalLoad> finals;
  std::optional<PipelineResult> pipeline;
  std::size_t event_files = 0;
};

// Without a grade export every sequential holding an assessment block counts as graded.
std::set<std::string> assessed_sequentials(const CourseTree& tree) {
  std::set<std::string> out;
  for (const auto& leaf : tree.leaves()) {
    if (!is_assessment(tree.at(leaf).block_type)) continue;
    if (const auto* seq = tree.ancestor_at(leaf, Level::kSequential)) out.insert(seq->id);
  }
  return out;
}

Inputs load_inputs(const RunConfig& cfg, Log& log, bool events_required) {
  Inputs in;
  in.tree = parse_course_tree(io::read_file(require(cfg.course, "course")));
  if (!cfg.week_overrides.empty()) {
    in.tree = in.tree.with_week_overrides(parse_week_overrides(io::read_file(cfg.week_overrides)));
  }
  log.event("info", "course", {{"modules", std::to_string(in.tree.size())},
                               {"leaves", std::to_string(in.tree.leaves().size())}});

  in.registry = load_lo_registry(io::read_file(require(cfg.lo_registry, "lo-registry")));
  in.tags = load_tags(io::read_file(require(cfg.tags, "tags")), in.registry, in.tree);
  log.event("info", "tags", {{"objectives", std::to_string(in.registry.size())},
                             {"records", std::to_string(in.tags.tags.size())},
                             {"violations", std::to_string(in.tags.violations.size())}});

  if (!cfg.grades.empty()) {
    in.grades = load_subsection_grades(io::read_file(cfg.grades), in.tree);
    in.filtered = filter_zero_possible(in.grades->records);
    in.graded = graded_sequentials(in.filtered.kept);
    log.event("info", "grades", {{"rows", std::to_string(in.grades->records.size())},
                                 {"issues", std::to_string(in.grades->issues.size())},
                                 {"zero_possible", std::to_string(in.filtered.dropped)}});
  } else {
    in.graded = assessed_sequentials(in.tree);
  }
  if (!cfg.final_grades.empty()) {
    in.finals = load_final_grades(io::read_file(cfg.final_grades), cfg.pass_threshold);
    log.event("info", "final_grades", {{"rows", std::to_string(in.finals->records.size())},
                                       {"issues", std::to_string(in.finals->issues.size())}});
  }

  if (cfg.events.empty()) {
    if (events_required) throw ConfigError("missing required --events");
    return in;
  }
  std::vector<fs::path> paths;
  for (const auto& pattern : cfg.events) {
    for (auto& p : io::expand_inputs(pattern)) paths.push_back(std::move(p));
  }
  std::sort(paths.begin(), paths.end());
  paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
  std::vector<std::string> sources;
  sources.reserve(paths.size());
  for (const auto& p : paths) sources.push_back(io::read_file(p));
  in.event_files = paths.size();

  PipelineConfig pc;
  pc.session.break_ms = static_cast<Millis>(std::llround(cfg.break_seconds * 1000.0));
  pc.session.terminal = cfg.terminal_dwell;
  pc.threads = cfg.effective_threads();
  if (!cfg.exclude_learners.empty()) {
    pc.excluded_learners = parse_exclusion_list(io::read_file(cfg.exclude_learners));
  }
  const auto start = std::chrono::steady_clock::now();
  in.pipeline = run_event_pipeline(sources, in.tree, pc);
  const auto& d = in.pipeline->diagnostics;
  log.event("info", "ingest", {{"files", std::to_string(paths.size())},
                               {"lines", std::to_string(d.lines_read)},
                               {"records", std::to_string(d.records)},
                               {"skipped", std::to_string(d.skipped_total())},
                               {"duplicates", std::to_string(d.duplicates_removed)},
                               {"out_of_order", std::to_string(d.out_of_order)},
                               {"learners", std::to_string(d.learners)},
                               {"ms", elapsed_ms(start)}});
  if (d.unmapped_events > 0) {
    log.event("warn", "unmapped_events", {{"count", std::to_string(d.unmapped_events)}});
  }
  if (d.records == 0) log.event("warn", "no_events");
  return in;
}

nlohmann::json ingest_json(const IngestDiagnostics& d) {
  return {{"lines_read", d.lines_read},
          {"records", d.records},
          {"skipped", d.skipped},
          {"skip_samples", d.skip_samples},
          {"excluded_events", d.excluded_events},
          {"duplicates_removed", d.duplicates_removed},
          {"out_of_order", d.out_of_order},
          {"learners", d.learners},
          {"segments", d.segments},
          {"unmapped_events", d.unmapped_events},
          {"unmapped_refs", d.unmapped_refs}};
}

nlohmann::json issues_json(const std::vector<RowIssue>& issues) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& i : issues) out.push_back({{"line", i.line_no}, {"reason", i.reason}});
  return out;
}

void add_finding(nlohmann::json& findings, const char* kind, std::size_t count,
                 nlohmann::json items = nlohmann::json::array()) {
  if (count == 0) return;
  findings.push_back({{"kind", kind}, {"count", count}, {"items", std::move(items)}});
}

// Diagnostics shared by validate and analyze; "findings" lists every
// validation problem, one entry per defect class.
nlohmann::json diagnostics_json(const Inputs& in, const CoverageReport& coverage) {
  nlohmann::json d = nlohmann::json::object();
  nlohmann::json findings = nlohmann::json::array();

  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : in.tags.violations) {
    violations.push_back({{"line", v.line_no}, {"module_id", v.module_id}, {"reason", v.reason}});
  }
  d["tags"] = {{"records", in.tags.tags.size()}, {"violations", violations}};
  d["registry"] = {{"objectives", in.registry.size()}, {"groups", in.registry.groups()}};
  d["course"] = {{"modules", in.tree.size()}, {"leaves", in.tree.leaves().size()}};

  add_finding(findings, "untagged_leaves", coverage.untagged_leaves.size(), coverage.untagged_leaves);
  add_finding(findings, "los_without_tags", coverage.los_without_tags.size(), coverage.los_without_tags);
  add_finding(findings, "los_without_assessment", coverage.los_without_assessment.size(),
              coverage.los_without_assessment);
  add_finding(findings, "tag_violations", in.tags.violations.size());

  if (in.grades) {
    d["grades"] = {{"rows", in.grades->records.size()},
                   {"issues", issues_json(in.grades->issues)},
                   {"zero_possible_dropped", in.filtered.dropped},
                   {"graded_sequentials", in.graded.size()}};
    add_finding(findings, "grade_row_issues", in.grades->issues.size());
    add_finding(findings, "zero_possible_rows", in.filtered.dropped);
  }
  if (in.finals) {
    d["final_grades"] = {{"rows", in.finals->records.size()}, {"issues", issues_json(in.finals->issues)}};
    add_finding(findings, "final_grade_row_issues", in.finals->issues.size());
  }
  if (in.pipeline) {
    const auto& ing = in.pipeline->diagnostics;
    d["ingest"] = ingest_json(ing);
    d["ingest"]["files"] = in.event_files;
    add_finding(findings, "malformed_event_lines", ing.skipped_total());
    add_finding(findings, "duplicate_events", ing.duplicates_removed);
    add_finding(findings, "out_of_order_events", ing.out_of_order);
  }
  d["findings"] = findings;
  return d;
}

template <typename F>
int guarded(Log& log, const char* command, F&& body) {
  try {
    return body();
  } catch (const SpecError& e) {
    log.event("error", command, {{"kind", "spec"}, {"message", e.what()}});
    return kExitFindings;
  } catch (const std::exception& e) {
    log.event("error", command, {{"message", e.what()}});
    return kExitFatal;
  }
}

}  // namespace

void RunConfig::validate() const {
  if (!(break_seconds > 0)) throw ConfigError("break-seconds must be > 0");
  if (!(pass_threshold >= 0 && pass_threshold <= 1)) throw ConfigError("pass-threshold must be in [0, 1]");
  if (segments.empty()) throw ConfigError("segments must not be empty");
}

unsigned RunConfig::effective_threads() const {
  if (threads > 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_option(RunConfig& c, std::string_view raw_key, std::string_view raw_value) {
  const auto key = normalize_key(raw_key);
  const std::string value(trim(raw_value));
  if (key == "course") c.course = value;
  else if (key == "events") c.events = split_list(value);
  else if (key == "tags") c.tags = value;
  else if (key == "lo-registry") c.lo_registry = value;
  else if (key == "grades") c.grades = value;
  else if (key == "final-grades") c.final_grades = value;
  else if (key == "week-overrides") c.week_overrides = value;
  else if (key == "exclude-learners") c.exclude_learners = value;
  else if (key == "out") c.out = value;
  else if (key == "spec") c.spec = value;
  else if (key == "break-seconds") c.break_seconds = parse_number(key, value);
  else if (key == "pass-threshold") c.pass_threshold = parse_number(key, value);
  else if (key == "terminal-dwell") {
    if (value == "zero") c.terminal_dwell = TerminalDwell::kZero;
    else if (value == "cap") c.terminal_dwell = TerminalDwell::kCap;
    else throw ConfigError("terminal-dwell must be zero or cap: " + value);
  } else if (key == "segments") {
    std::vector<Segment> segs;
    for (const auto& s : split_list(value)) {
      const auto seg = parse_segment(s);
      if (!seg) throw ConfigError("unknown segment: " + s);
      if (std::find(segs.begin(), segs.end(), *seg) == segs.end()) segs.push_back(*seg);
    }
    c.segments = std::move(segs);
  } else if (key == "seed") {
    const auto v = parse_int(value);
    if (!v || *v < 0) throw ConfigError("seed must be a non-negative integer: " + value);
    c.seed = static_cast<std::uint64_t>(*v);
  } else if (key == "threads") {
    const auto v = parse_int(value);
    if (!v || *v < 0 || *v > 1024) throw ConfigError("threads must be in [0, 1024]: " + value);
    c.threads = static_cast<unsigned>(*v);
  } else if (key == "spearman") {
    if (value == "true" || value == "1") c.spearman = true;
    else if (value == "false" || value == "0") c.spearman = false;
    else throw ConfigError("spearman must be true or false: " + value);
  } else {
    throw ConfigError("unknown option: " + std::string(raw_key));
  }
}

void apply_config_file(RunConfig& config, std::string_view text) {
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    try {
      set_option(config, line.substr(0, eq), value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string config_used(const RunConfig& c) {
  std::vector<std::string> segs;
  for (auto s : c.segments) segs.emplace_back(to_string(s));
  std::map<std::string, std::string> kv = {
      {"course", c.course},
      {"events", join(c.events, ',')},
      {"tags", c.tags},
      {"lo-registry", c.lo_registry},
      {"grades", c.grades},
      {"final-grades", c.final_grades},
      {"week-overrides", c.week_overrides},
      {"exclude-learners", c.exclude_learners},
      {"break-seconds", shortest(c.break_seconds)},
      {"pass-threshold", shortest(c.pass_threshold)},
      {"terminal-dwell", c.terminal_dwell == TerminalDwell::kCap ? "cap" : "zero"},
      {"segments", join(segs, ',')},
      {"spearman", c.spearman ? "true" : "false"},
  };
  if (c.seed) kv["seed"] = std::to_string(*c.seed);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = \"" + v + "\"\n";
  return out;
}

void Log::event(std::string_view level, std::string_view name,
                const std::vector<std::pair<std::string, std::string>>& fields) {
  std::string line = "loscope level=" + std::string(level) + " event=" + std::string(name);
  for (const auto& [k, v] : fields) {
    line += ' ' + k + '=';
    if (v.find_first_of(" \"=") == std::string::npos && !v.empty()) {
      line += v;
    } else {
      line += nlohmann::json(v).dump();
    }
  }
  out_ << line << '\n';
  out_.flush();
}

int cmd_validate(const RunConfig& config, Log& log) {
  return guarded(log, "validate", [&] {
    config.validate();
    const auto in = load_inputs(config, log, false);
    const auto coverage = coverage_report(in.tree, in.tags.tags, in.registry, in.graded);
    auto d = diagnostics_json(in, coverage);
    d["coverage"] = {{"untagged_leaves", coverage.untagged_leaves},
                     {"los_without_tags", coverage.los_without_tags},
                     {"los_without_assessment", coverage.los_without_assessment}};
    io::write_file(fs::path(config.out) / report::TableFiles::kDiagnostics, d.dump(2) + "\n");
    for (const auto& f : d["findings"]) {
      log.event("warn", "finding", {{"kind", f["kind"].get<std::string>()},
                                    {"count", std::to_string(f["count"].get<std::size_t>())}});
      for (const auto& item : f["items"]) {
        log.event("warn", "finding_item", {{"kind", f["kind"].get<std::string>()},
                                           {"id", item.get<std::string>()}});
      }
    }
    const bool clean = d["findings"].empty();
    log.event("info", "validate", {{"status", clean ? "clean" : "findings"}});
    return clean ? kExitOk : kExitFindings;
  });
}

int cmd_analyze(const RunConfig& config, Log& log) {
  return guarded(log, "analyze", [&] {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto in = load_inputs(config, log, true);
    const auto& pipeline = *in.pipeline;

    report::Results r;
    r.dwell = lo_dwell_summary(pipeline.attribution, in.tags.tags, in.tree, in.registry);

    std::vector<LoGrade> lo_grades;
    nlohmann::json untagged_points = nlohmann::json::object();
    if (in.grades) {
      auto agg = aggregate_by_lo(in.filtered.kept, in.tags.tags, in.tree);
      lo_grades = std::move(agg.grades);
      for (const auto& [seq, pts] : agg.untagged_points) untagged_points[seq] = pts;
    }
    const std::vector<FinalGrade> no_finals;
    const auto& finals = in.finals ? in.finals->records : no_finals;
    if (in.grades) {
      for (auto seg : config.segments) r.boxes.push_back(lo_grade_box(lo_grades, finals, seg, in.registry));
    }

    if (in.finals) {
      std::map<std::string, double> dwell_s;
      for (const auto& [learner, ms] : pipeline.attribution.learner_totals()) {
        dwell_s[learner] = static_cast<double>(ms) / 1000.0;
      }
      try {
        r.correlation = engagement_performance(dwell_s, finals, config.spearman);
      } catch (const DegenerateInput& e) {
        r.correlation_error = e.what();
      }
    } else {
      r.correlation_error = "no final grades supplied";
    }
    if (r.correlation) {
      log.event("info", "correlation", {{"r", shortest(r.correlation->r)},
                                        {"p", shortest(r.correlation->p)},
                                        {"n", std::to_string(r.correlation->n)}});
    } else {
      log.event("warn", "correlation_undefined", {{"reason", r.correlation_error}});
    }

    r.bloom = bloom_distribution(in.tags.tags, in.tree);
    r.bipartite = bipartite_edges(in.tree, in.tags.tags);
    r.coverage = coverage_report(in.tree, in.tags.tags, in.registry, in.graded);
    r.diagnostics = diagnostics_json(in, r.coverage);
    if (in.grades) r.diagnostics["grades"]["untagged_points"] = untagged_points;

    const fs::path out(config.out);
    report::emit_tables(r, out);
    io::write_file(out / kConfigUsedFile, config_used(config));
    report::write_manifest(out);
    log.event("info", "analyze", {{"out", config.out}, {"ms", elapsed_ms(start)}});
    return kExitOk;
  });
}

int cmd_report(const RunConfig& config, Log& log) {
  return guarded(log, "report", [&] {
    const fs::path out(config.out);
    const auto tables = report::read_tables(out);
    const auto entries = report::emit_report(tables, out);
    report::write_manifest(out);
    log.event("info", "report", {{"out", config.out}, {"files", std::to_string(entries.size())}});
    return kExitOk;
  });
}

int cmd_synth(const RunConfig& config, Log& log, std::ostream& out) {
  return guarded(log, "synth", [&] {
    synth::CohortSpec spec;
    if (!config.spec.empty()) spec = synth::parse_cohort_spec(io::read_file(config.spec));
    if (config.seed) spec.seed = *config.seed;
    const auto start = std::chrono::steady_clock::now();
    const auto written = synth::write_fixture(spec, config.out, config.effective_threads());
    out << "realized_r " << shortest(written.truth.realized_r) << "\n";
    out << "n " << written.truth.n << "\n";
    for (const auto& [path, sha] : written.manifest) out << sha << "  " << path << "\n";
    log.event("info", "synth", {{"out", config.out},
                                {"learners", std::to_string(written.truth.learners.size())},
                                {"event_lines", std::to_string(written.truth.event_lines)},
                                {"files", std::to_string(written.manifest.size())},
                                {"ms", elapsed_ms(start)}});
    return kExitOk;
  });
}

int cmd_all(const RunConfig& config, Log& log) {
  const int status = cmd_analyze(config, log);
  if (status != kExitOk) return status;
  return cmd_report(config, log);
}

}  // namespace loscope::cli
