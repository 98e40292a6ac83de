#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "loscope/course_model.hpp"

namespace loscope {

// Milliseconds since the Unix epoch, UTC.
using Millis = std::int64_t;

enum class EventSource { kBrowser, kServer, kMobile };

std::string_view to_string(EventSource source);

struct EventRecord {
  std::string learner_id;
  Millis timestamp = 0;
  std::string event_type;
  std::optional<std::string> module_ref;
  EventSource source = EventSource::kBrowser;
  std::uint64_t line_no = 0;

  bool operator==(const EventRecord&) const = default;
};

enum class SkipReason { kMalformed, kMissingLearner, kBadTimestamp };

std::string_view to_string(SkipReason reason);

struct Skip {
  SkipReason reason;
  std::string detail;
};

using ParsedLine = std::variant<EventRecord, Skip>;

// ISO-8601 with mandatory zone designator (Z or numeric offset); fractional
// seconds beyond milliseconds are truncated.
std::optional<Millis> parse_timestamp(std::string_view text);
// "YYYY-MM-DDTHH:MM:SS.mmmZ"
std::string format_timestamp(Millis ms);

// One ndjson line -> record, or a categorized skip. Never throws.
ParsedLine parse_event_line(std::string_view line, std::uint64_t line_no = 0);

struct LearnerEvents {
  std::string learner_id;
  std::vector<EventRecord> events;
};

struct Partitioned {
  std::vector<LearnerEvents> learners;  // ascending learner_id
  std::size_t duplicates_removed = 0;
};

// Groups by learner and orders each group by (timestamp, event_type,
// module_ref, source, line_no); records equal on (timestamp, event_type,
// module_ref) collapse to the first. The content-based tie-break makes the
// result independent of input order.
Partitioned partition_and_sort(std::vector<EventRecord> records, unsigned threads = 1);

struct DwellSegment {
  std::string learner_id;
  std::optional<std::string> module_id;  // nullopt = unmapped
  Millis start = 0;
  Millis dwell_ms = 0;

  double dwell_s() const { return static_cast<double>(dwell_ms) / 1000.0; }
  bool operator==(const DwellSegment&) const = default;
};

enum class TerminalDwell { kZero, kCap };

struct SessionConfig {
  Millis break_ms = 600'000;
  TerminalDwell terminal = TerminalDwell::kZero;
};

// One segment per event. A gap <= break_ms is the event's dwell; a larger gap
// or no successor yields 0 (or break_ms under TerminalDwell::kCap).
// Throws UnsortedInput on decreasing timestamps or mixed learners.
std::vector<DwellSegment> sessionize(std::span<const EventRecord> events, const CourseTree& tree,
                                     const SessionConfig& config = {});

struct Attribution {
  // (learner_id, module_id) -> dwell
  std::map<std::pair<std::string, std::string>, Millis> module_totals;
  // learner_id -> dwell on unmapped segments
  std::map<std::string, Millis> unmapped;

  Millis total() const;
  // learner_id -> mapped + unmapped dwell
  std::map<std::string, Millis> learner_totals() const;
};

Attribution attribute(std::span<const DwellSegment> segments);

struct IngestDiagnostics {
  std::uint64_t lines_read = 0;
  std::uint64_t records = 0;
  std::map<std::string, std::uint64_t> skipped;  // reason -> count
  std::vector<std::string> skip_samples;         // first few "line N: reason: detail"
  std::uint64_t excluded_events = 0;
  std::uint64_t duplicates_removed = 0;
  // Records whose timestamp precedes an earlier-ingested record of the same learner.
  std::uint64_t out_of_order = 0;
  std::uint64_t learners = 0;
  std::uint64_t segments = 0;
  std::uint64_t unmapped_events = 0;
  std::map<std::string, std::uint64_t> unmapped_refs;  // capped at kMaxUnmappedRefs distinct

  static constexpr std::size_t kMaxSkipSamples = 20;
  static constexpr std::size_t kMaxUnmappedRefs = 50;

  std::uint64_t skipped_total() const;
};

struct PipelineConfig {
  SessionConfig session;
  std::set<std::string> excluded_learners;
  unsigned threads = 1;
};

struct PipelineResult {
  std::vector<DwellSegment> segments;  // by learner, then time
  Attribution attribution;
  IngestDiagnostics diagnostics;
};

// Full ingestion over in-memory ndjson sources (one string per file, read in
// order; line numbers run across sources). Output is identical for any
// thread count.
PipelineResult run_event_pipeline(std::span<const std::string> sources, const CourseTree& tree,
                                  const PipelineConfig& config);

// One learner_id per line; blank lines and '#' comments ignored.
std::set<std::string> parse_exclusion_list(std::string_view text);

}  // namespace loscope
