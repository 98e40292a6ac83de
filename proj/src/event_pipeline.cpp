#include "loscope/event_pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <tuple>
#include <unordered_map>

#include "loscope/error.hpp"
#include "loscope/parallel.hpp"
#include "loscope/text.hpp"

namespace loscope {

using json = nlohmann::json;

namespace {

bool read_digits(std::string_view s, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

std::optional<std::string> string_member(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return std::nullopt;
  auto value = it->get<std::string>();
  if (value.empty()) return std::nullopt;
  return value;
}

// edX emits "event" either as an object or as a JSON-encoded string.
std::optional<std::string> event_block_id(const json& obj) {
  auto it = obj.find("event");
  if (it == obj.end()) return std::nullopt;
  if (it->is_object()) return string_member(*it, "id");
  if (it->is_string()) {
    const auto& text = it->get_ref<const std::string&>();
    if (text.empty() || text.front() != '{') return std::nullopt;
    json inner = json::parse(text, nullptr, false);
    if (inner.is_discarded() || !inner.is_object()) return std::nullopt;
    return string_member(inner, "id");
  }
  return std::nullopt;
}

Skip skip(SkipReason reason, std::string detail) { return Skip{reason, std::move(detail)}; }

auto sort_key(const EventRecord& e) {
  return std::tie(e.timestamp, e.event_type, e.module_ref, e.source, e.line_no);
}

bool same_event(const EventRecord& a, const EventRecord& b) {
  return a.timestamp == b.timestamp && a.event_type == b.event_type &&
         a.module_ref == b.module_ref;
}

struct ParsedChunk {
  std::vector<EventRecord> records;
  std::vector<std::pair<std::uint64_t, Skip>> skips;
};

}  // namespace

std::string_view to_string(EventSource source) {
  switch (source) {
    case EventSource::kBrowser: return "browser";
    case EventSource::kServer: return "server";
    case EventSource::kMobile: return "mobile";
  }
  return "browser";
}

std::string_view to_string(SkipReason reason) {
  switch (reason) {
    case SkipReason::kMalformed: return "malformed";
    case SkipReason::kMissingLearner: return "missing_learner";
    case SkipReason::kBadTimestamp: return "bad_timestamp";
  }
  return "malformed";
}

std::optional<Millis> parse_timestamp(std::string_view s) {
  s = trim(s);
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!read_digits(s, 0, 4, year) || s.size() < 19 || s[4] != '-' ||
      !read_digits(s, 5, 2, month) || s[7] != '-' || !read_digits(s, 8, 2, day) ||
      (s[10] != 'T' && s[10] != 't' && s[10] != ' ') || !read_digits(s, 11, 2, hour) ||
      s[13] != ':' || !read_digits(s, 14, 2, minute) || s[16] != ':' ||
      !read_digits(s, 17, 2, second)) {
    return std::nullopt;
  }
  if (hour > 23 || minute > 59 || second > 59) return std::nullopt;
  std::size_t pos = 19;
  int millis = 0;
  if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
    ++pos;
    const std::size_t start = pos;
    int scale = 100;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (scale > 0) {
        millis += (s[pos] - '0') * scale;
        scale /= 10;
      }
      ++pos;
    }
    if (pos == start) return std::nullopt;
  }
  if (pos >= s.size()) return std::nullopt;  // no zone designator
  int offset_min = 0;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    const int sign = s[pos] == '-' ? -1 : 1;
    int oh = 0, om = 0;
    if (!read_digits(s, pos + 1, 2, oh)) return std::nullopt;
    pos += 3;
    if (pos < s.size()) {
      if (s[pos] == ':') ++pos;
      if (!read_digits(s, pos, 2, om)) return std::nullopt;
      pos += 2;
    }
    if (oh > 23 || om > 59) return std::nullopt;
    offset_min = sign * (oh * 60 + om);
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;

  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) return std::nullopt;
  const Millis days = sys_days{ymd}.time_since_epoch().count();
  return ((days * 24 + hour) * 60 + minute - offset_min) * 60'000LL + second * 1000LL + millis;
}

std::string format_timestamp(Millis ms) {
  using namespace std::chrono;
  const sys_time<milliseconds> tp{milliseconds{ms}};
  const auto day_point = floor<days>(tp);
  const year_month_day ymd{day_point};
  const auto rem = tp - day_point;
  const auto h = duration_cast<hours>(rem).count();
  const auto m = duration_cast<minutes>(rem).count() % 60;
  const auto s = duration_cast<seconds>(rem).count() % 60;
  const auto milli = rem.count() % 1000;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<long long>(h),
                static_cast<long long>(m), static_cast<long long>(s),
                static_cast<long long>(milli));
  return buf;
}

ParsedLine parse_event_line(std::string_view line, std::uint64_t line_no) {
  if (trim(line).empty()) return skip(SkipReason::kMalformed, "empty line");
  json obj = json::parse(line, nullptr, false);
  if (obj.is_discarded()) return skip(SkipReason::kMalformed, "not valid JSON");
  if (!obj.is_object()) return skip(SkipReason::kMalformed, "not a JSON object");

  EventRecord rec;
  rec.line_no = line_no;
  auto learner = string_member(obj, "username");
  if (!learner) return skip(SkipReason::kMissingLearner, "username missing or empty");
  rec.learner_id = std::move(*learner);

  auto time_it = obj.find("time");
  if (time_it == obj.end() || !time_it->is_string()) {
    return skip(SkipReason::kBadTimestamp, "time missing");
  }
  auto ts = parse_timestamp(time_it->get_ref<const std::string&>());
  if (!ts) {
    return skip(SkipReason::kBadTimestamp,
                "unparseable time \"" + time_it->get<std::string>() + "\"");
  }
  rec.timestamp = *ts;

  auto type = string_member(obj, "event_type");
  if (!type) return skip(SkipReason::kMalformed, "event_type missing");
  rec.event_type = std::move(*type);

  rec.module_ref = event_block_id(obj);
  if (!rec.module_ref) rec.module_ref = string_member(obj, "page");

  if (auto src = obj.find("event_source"); src != obj.end() && !src->is_null()) {
    const std::string value = src->is_string() ? src->get<std::string>() : std::string();
    if (value == "browser") rec.source = EventSource::kBrowser;
    else if (value == "server") rec.source = EventSource::kServer;
    else if (value == "mobile") rec.source = EventSource::kMobile;
    else return skip(SkipReason::kMalformed, "unknown event_source");
  }
  return rec;
}

Partitioned partition_and_sort(std::vector<EventRecord> records, unsigned threads) {
  std::unordered_map<std::string, std::size_t> slot;
  Partitioned out;
  for (auto& rec : records) {
    auto [it, inserted] = slot.emplace(rec.learner_id, out.learners.size());
    if (inserted) out.learners.push_back(LearnerEvents{rec.learner_id, {}});
    out.learners[it->second].events.push_back(std::move(rec));
  }
  std::sort(out.learners.begin(), out.learners.end(),
            [](const LearnerEvents& a, const LearnerEvents& b) {
              return a.learner_id < b.learner_id;
            });

  std::vector<std::size_t> removed(out.learners.size(), 0);
  parallel_for(out.learners.size(), threads, [&](std::size_t i) {
    auto& events = out.learners[i].events;
    std::sort(events.begin(), events.end(),
              [](const EventRecord& a, const EventRecord& b) { return sort_key(a) < sort_key(b); });
    auto last = std::unique(events.begin(), events.end(), same_event);
    removed[i] = static_cast<std::size_t>(events.end() - last);
    events.erase(last, events.end());
  });
  for (auto r : removed) out.duplicates_removed += r;
  return out;
}

std::vector<DwellSegment> sessionize(std::span<const EventRecord> events, const CourseTree& tree,
                                     const SessionConfig& config) {
  std::vector<DwellSegment> out;
  out.reserve(events.size());
  const Millis void_dwell = config.terminal == TerminalDwell::kCap ? config.break_ms : 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    Millis dwell = void_dwell;
    if (i + 1 < events.size()) {
      const auto& next = events[i + 1];
      if (next.learner_id != e.learner_id) {
        throw UnsortedInput("sessionize: events from more than one learner (" + e.learner_id +
                            ", " + next.learner_id + ")");
      }
      const Millis gap = next.timestamp - e.timestamp;
      if (gap < 0) {
        throw UnsortedInput("sessionize: timestamps decrease at line " +
                            std::to_string(next.line_no) + " for learner " + e.learner_id);
      }
      if (gap <= config.break_ms) dwell = gap;
    }
    std::optional<std::string> module;
    if (e.module_ref) module = resolve_event_ref(tree, *e.module_ref);
    out.push_back(DwellSegment{e.learner_id, std::move(module), e.timestamp, dwell});
  }
  return out;
}

Millis Attribution::total() const {
  Millis sum = 0;
  for (const auto& [key, ms] : module_totals) sum += ms;
  for (const auto& [key, ms] : unmapped) sum += ms;
  return sum;
}

std::map<std::string, Millis> Attribution::learner_totals() const {
  std::map<std::string, Millis> out;
  for (const auto& [key, ms] : module_totals) out[key.first] += ms;
  for (const auto& [learner, ms] : unmapped) out[learner] += ms;
  return out;
}

Attribution attribute(std::span<const DwellSegment> segments) {
  Attribution out;
  for (const auto& seg : segments) {
    if (seg.module_id) {
      out.module_totals[{seg.learner_id, *seg.module_id}] += seg.dwell_ms;
    } else {
      out.unmapped[seg.learner_id] += seg.dwell_ms;
    }
  }
  return out;
}

std::uint64_t IngestDiagnostics::skipped_total() const {
  std::uint64_t n = 0;
  for (const auto& [reason, count] : skipped) n += count;
  return n;
}

PipelineResult run_event_pipeline(std::span<const std::string> sources, const CourseTree& tree,
                                  const PipelineConfig& config) {
  PipelineResult result;
  auto& diag = result.diagnostics;

  std::vector<std::string_view> lines;
  for (const auto& src : sources) {
    std::string_view rest = src;
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      lines.push_back(rest.substr(0, nl));
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  diag.lines_read = lines.size();

  const unsigned threads = std::max(1u, config.threads);
  const std::size_t chunks = std::min<std::size_t>(lines.size(), threads * 4ULL);
  std::vector<ParsedChunk> parsed(chunks);
  const std::size_t per_chunk = chunks ? (lines.size() + chunks - 1) / chunks : 0;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t begin = c * per_chunk;
    const std::size_t end = std::min(lines.size(), begin + per_chunk);
    auto& chunk = parsed[c];
    for (std::size_t i = begin; i < end; ++i) {
      auto line = lines[i];
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      auto p = parse_event_line(line, i + 1);
      if (auto* rec = std::get_if<EventRecord>(&p)) {
        chunk.records.push_back(std::move(*rec));
      } else {
        chunk.skips.emplace_back(i + 1, std::get<Skip>(std::move(p)));
      }
    }
  });

  std::vector<EventRecord> records;
  std::unordered_map<std::string, Millis> latest;
  for (auto& chunk : parsed) {
    for (auto& [line_no, s] : chunk.skips) {
      ++diag.skipped[std::string(to_string(s.reason))];
      if (diag.skip_samples.size() < IngestDiagnostics::kMaxSkipSamples) {
        diag.skip_samples.push_back("line " + std::to_string(line_no) + ": " +
                                    std::string(to_string(s.reason)) + ": " + s.detail);
      }
    }
    for (auto& rec : chunk.records) {
      if (config.excluded_learners.count(rec.learner_id)) {
        ++diag.excluded_events;
        continue;
      }
      auto [it, inserted] = latest.emplace(rec.learner_id, rec.timestamp);
      if (!inserted) {
        if (rec.timestamp < it->second) ++diag.out_of_order;
        else it->second = rec.timestamp;
      }
      records.push_back(std::move(rec));
    }
    chunk = ParsedChunk{};
  }
  diag.records = records.size();

  auto partitioned = partition_and_sort(std::move(records), threads);
  diag.duplicates_removed = partitioned.duplicates_removed;
  diag.learners = partitioned.learners.size();

  std::vector<std::vector<DwellSegment>> per_learner(partitioned.learners.size());
  parallel_for(per_learner.size(), threads, [&](std::size_t i) {
    per_learner[i] = sessionize(partitioned.learners[i].events, tree, config.session);
  });

  std::size_t total = 0;
  for (const auto& v : per_learner) total += v.size();
  result.segments.reserve(total);
  for (std::size_t i = 0; i < per_learner.size(); ++i) {
    const auto& events = partitioned.learners[i].events;
    for (std::size_t k = 0; k < per_learner[i].size(); ++k) {
      const auto& seg = per_learner[i][k];
      if (!seg.module_id) {
        ++diag.unmapped_events;
        const std::string ref = events[k].module_ref.value_or("<none>");
        auto it = diag.unmapped_refs.find(ref);
        if (it != diag.unmapped_refs.end()) ++it->second;
        else if (diag.unmapped_refs.size() < IngestDiagnostics::kMaxUnmappedRefs)
          diag.unmapped_refs.emplace(ref, 1);
      }
    }
    std::move(per_learner[i].begin(), per_learner[i].end(), std::back_inserter(result.segments));
  }
  diag.segments = result.segments.size();
  result.attribution = attribute(result.segments);
  return result;
}

std::set<std::string> parse_exclusion_list(std::string_view text) {
  std::set<std::string> out;
  for (const auto& raw : split(text, '\n')) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    out.emplace(line);
  }
  return out;
}

}  // namespace loscope
