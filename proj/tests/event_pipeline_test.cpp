#include "loscope/event_pipeline.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "loscope/error.hpp"
#include "test_support.hpp"

namespace loscope {
namespace {

const CourseTree& grid_tree() {
  static const CourseTree tree = parse_course_tree(testing::make_grid_course(2, 2, 2, 3).json);
  return tree;
}

EventRecord ev(std::string learner, Millis t_s, std::string ref = "ch0.s0.v0.b0",
               std::uint64_t line = 0) {
  EventRecord e;
  e.learner_id = std::move(learner);
  e.timestamp = t_s * 1000;
  e.event_type = "page_view";
  e.module_ref = std::move(ref);
  e.line_no = line;
  return e;
}

std::vector<Millis> dwells(const std::vector<DwellSegment>& segs) {
  std::vector<Millis> out;
  for (const auto& s : segs) out.push_back(s.dwell_ms / 1000);
  return out;
}

TEST(EventParseTest, SchemaExample) {
  const auto p = parse_event_line(
      R"({"username":"u1","time":"2018-03-01T10:00:00Z","event_type":"play_video","page":"block-v1:X+type@video+block@v1"})",
      7);
  const auto* rec = std::get_if<EventRecord>(&p);
  ASSERT_NE(rec, nullptr);
  EXPECT_EQ(rec->learner_id, "u1");
  EXPECT_EQ(format_timestamp(rec->timestamp), "2018-03-01T10:00:00.000Z");
  EXPECT_EQ(rec->event_type, "play_video");
  EXPECT_EQ(rec->module_ref, "block-v1:X+type@video+block@v1");
  EXPECT_EQ(rec->source, EventSource::kBrowser);
  EXPECT_EQ(rec->line_no, 7u);
}

TEST(EventParseTest, SkipReasons) {
  auto reason = [](std::string_view line) {
    const auto p = parse_event_line(line);
    EXPECT_TRUE(std::holds_alternative<Skip>(p)) << line;
    return std::holds_alternative<Skip>(p) ? std::get<Skip>(p).reason : SkipReason::kMalformed;
  };
  EXPECT_EQ(reason(""), SkipReason::kMalformed);
  EXPECT_EQ(reason("{oops"), SkipReason::kMalformed);
  EXPECT_EQ(reason("[1,2]"), SkipReason::kMalformed);
  EXPECT_EQ(reason(R"({"username":"u1","event_type":"x"})"), SkipReason::kBadTimestamp);
  EXPECT_EQ(reason(R"({"username":"u1","time":"2018-03-01T10:00:00","event_type":"x"})"),
            SkipReason::kBadTimestamp);
  EXPECT_EQ(reason(R"({"username":"","time":"2018-03-01T10:00:00Z","event_type":"x"})"),
            SkipReason::kMissingLearner);
  EXPECT_EQ(reason(R"({"time":"2018-03-01T10:00:00Z","event_type":"x"})"),
            SkipReason::kMissingLearner);
  EXPECT_EQ(reason(R"({"username":"u","time":"2018-03-01T10:00:00Z"})"), SkipReason::kMalformed);
  EXPECT_EQ(reason(R"({"username":"u","time":"2018-03-01T10:00:00Z","event_type":"x","event_source":"fax"})"),
            SkipReason::kMalformed);
}

TEST(EventParseTest, EventIdWinsOverPage) {
  auto p = parse_event_line(
      R"({"username":"u","time":"2018-03-01T10:00:00Z","event_type":"play_video","event_source":"mobile",)"
      R"("page":"p","event":"{\"id\": \"blk\", \"currentTime\": 3}"})");
  ASSERT_TRUE(std::holds_alternative<EventRecord>(p));
  EXPECT_EQ(std::get<EventRecord>(p).module_ref, "blk");
  EXPECT_EQ(std::get<EventRecord>(p).source, EventSource::kMobile);
  p = parse_event_line(
      R"({"username":"u","time":"2018-03-01T10:00:00Z","event_type":"problem_check","event_source":"server","event":{"id":"prob"}})");
  ASSERT_TRUE(std::holds_alternative<EventRecord>(p));
  EXPECT_EQ(std::get<EventRecord>(p).module_ref, "prob");
}

TEST(TimestampTest, ZonesAndFractions) {
  const Millis base = *parse_timestamp("2018-03-01T10:00:00Z");
  EXPECT_EQ(base, 1519898400000);
  EXPECT_EQ(*parse_timestamp("2018-03-01T12:30:00+02:30"), base);
  EXPECT_EQ(*parse_timestamp("2018-03-01T05:00:00-0500"), base);
  EXPECT_EQ(*parse_timestamp("2018-03-01T10:00:00.123456+00:00"), base + 123);
  EXPECT_EQ(*parse_timestamp("2018-03-01 10:00:00.5Z"), base + 500);
  EXPECT_FALSE(parse_timestamp("2018-03-01T10:00:00"));
  EXPECT_FALSE(parse_timestamp("2018-02-30T10:00:00Z"));
  EXPECT_FALSE(parse_timestamp("2018-03-01T24:00:00Z"));
  EXPECT_FALSE(parse_timestamp("2018-03-01T10:00:00Zjunk"));
  EXPECT_EQ(format_timestamp(base + 5), "2018-03-01T10:00:00.005Z");
}

TEST(PartitionTest, SortsAndDedups) {
  std::vector<EventRecord> in = {ev("b", 20, "r", 1), ev("a", 30, "r", 2), ev("a", 10, "r", 3),
                                 ev("a", 10, "r", 4)};
  const auto out = partition_and_sort(in);
  ASSERT_EQ(out.learners.size(), 2u);
  EXPECT_EQ(out.learners[0].learner_id, "a");
  ASSERT_EQ(out.learners[0].events.size(), 2u);
  EXPECT_EQ(out.learners[0].events[0].timestamp, 10000);
  EXPECT_EQ(out.learners[0].events[0].line_no, 3u);
  EXPECT_EQ(out.learners[0].events[1].timestamp, 30000);
  EXPECT_EQ(out.duplicates_removed, 1u);
}

std::vector<EventRecord> random_events(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  const auto& leaves = grid_tree().leaves();
  std::vector<EventRecord> out;
  std::map<std::string, Millis> clock;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string learner = "u" + std::to_string(rng() % 10);
    Millis& t = clock[learner];
    // Mostly short gaps, some breaks, some exactly at the threshold.
    const auto roll = rng() % 20;
    t += roll == 0 ? 3'600'000 : roll == 1 ? 600'000 : roll == 2 ? 600'001
                                                               : static_cast<Millis>(1 + rng() % 400'000);
    EventRecord e;
    e.learner_id = learner;
    e.timestamp = t;
    e.event_type = rng() % 2 ? "play_video" : "problem_check";
    if (rng() % 10 == 0) e.module_ref = "unknown-ref";
    else if (rng() % 25 != 0) e.module_ref = leaves[rng() % leaves.size()];
    e.line_no = i + 1;
    out.push_back(std::move(e));
  }
  return out;
}

TEST(PartitionTest, PermutationInvariant) {
  auto events = random_events(10'000, 11);
  const auto reference = partition_and_sort(events);
  std::mt19937 rng(5);
  for (int round = 0; round < 3; ++round) {
    std::shuffle(events.begin(), events.end(), rng);
    for (std::size_t i = 0; i < events.size(); ++i) events[i].line_no = i + 1;
    const auto shuffled = partition_and_sort(events, 3);
    ASSERT_EQ(shuffled.learners.size(), reference.learners.size());
    for (std::size_t l = 0; l < reference.learners.size(); ++l) {
      const auto& a = reference.learners[l].events;
      const auto& b = shuffled.learners[l].events;
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].timestamp, b[k].timestamp);
        EXPECT_EQ(a[k].module_ref, b[k].module_ref);
        EXPECT_EQ(a[k].event_type, b[k].event_type);
      }
    }
  }
}

TEST(SessionizeTest, HandComputedExamples) {
  const auto& tree = grid_tree();
  std::vector<EventRecord> one = {ev("u", 0)};
  EXPECT_EQ(dwells(sessionize(one, tree)), (std::vector<Millis>{0}));

  std::vector<EventRecord> with_break = {ev("u", 0), ev("u", 300), ev("u", 1200)};
  EXPECT_EQ(dwells(sessionize(with_break, tree)), (std::vector<Millis>{300, 0, 0}));

  std::vector<EventRecord> steady = {ev("u", 0), ev("u", 100), ev("u", 200)};
  EXPECT_EQ(dwells(sessionize(steady, tree)), (std::vector<Millis>{100, 100, 0}));

  std::vector<EventRecord> boundary = {ev("u", 0), ev("u", 600), ev("u", 1201)};
  EXPECT_EQ(dwells(sessionize(boundary, tree)), (std::vector<Millis>{600, 0, 0}));

  SessionConfig cap{600'000, TerminalDwell::kCap};
  EXPECT_EQ(dwells(sessionize(with_break, tree, cap)), (std::vector<Millis>{300, 600, 600}));

  SessionConfig short_break{60'000, TerminalDwell::kZero};
  EXPECT_EQ(dwells(sessionize(steady, tree, short_break)), (std::vector<Millis>{0, 0, 0}));
}

TEST(SessionizeTest, ResolvesModules) {
  std::vector<EventRecord> events = {ev("u", 0, "x@ch0.s0.v0.b1"), ev("u", 10, "nope")};
  events[1].module_ref.reset();
  const auto segs = sessionize(events, grid_tree());
  EXPECT_EQ(segs[0].module_id, "ch0.s0.v0.b1");
  EXPECT_EQ(segs[1].module_id, std::nullopt);
}

TEST(SessionizeTest, RejectsUnsortedInput) {
  std::vector<EventRecord> backwards = {ev("u", 10), ev("u", 5)};
  EXPECT_THROW(sessionize(backwards, grid_tree()), UnsortedInput);
  std::vector<EventRecord> mixed = {ev("u", 1), ev("v", 5)};
  EXPECT_THROW(sessionize(mixed, grid_tree()), UnsortedInput);
}

TEST(AttributeTest, SumsAndUnmappedBucket) {
  std::vector<DwellSegment> segs = {{"u", "m", 0, 100}, {"u", "m", 1, 200}, {"u", std::nullopt, 2, 60'000},
                                    {"v", "m", 0, 60'000}};
  const auto a = attribute(segs);
  EXPECT_EQ((a.module_totals.at({"u", "m"})), 300);
  EXPECT_EQ(a.unmapped.at("u"), 60'000);
  EXPECT_EQ((a.module_totals.at({"v", "m"})), 60'000);
  EXPECT_EQ(a.total(), 120'300);
  EXPECT_EQ(a.learner_totals().at("u"), 60'300);
}

// Independent reference: one global sort by (learner, time), one pass.
std::vector<DwellSegment> oracle_segments(std::vector<EventRecord> events, Millis break_ms) {
  std::stable_sort(events.begin(), events.end(), [](const EventRecord& a, const EventRecord& b) {
    return a.learner_id != b.learner_id ? a.learner_id < b.learner_id : a.timestamp < b.timestamp;
  });
  std::vector<DwellSegment> out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    Millis dwell = 0;
    if (i + 1 < events.size() && events[i + 1].learner_id == events[i].learner_id) {
      const Millis gap = events[i + 1].timestamp - events[i].timestamp;
      if (gap <= break_ms) dwell = gap;
    }
    std::optional<std::string> module;
    if (events[i].module_ref) {
      for (const auto& m : grid_tree().modules()) {
        if (m.id == *events[i].module_ref) module = m.id;
      }
    }
    out.push_back({events[i].learner_id, module, events[i].timestamp, dwell});
  }
  return out;
}

std::vector<std::string> to_lines(const std::vector<EventRecord>& events) {
  std::vector<std::string> lines;
  for (const auto& e : events) {
    nlohmann::json j = {{"username", e.learner_id}, {"time", format_timestamp(e.timestamp)},
                        {"event_type", e.event_type}};
    if (e.module_ref) j["page"] = *e.module_ref;
    lines.push_back(j.dump());
  }
  return lines;
}

std::string join(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

TEST(PipelineTest, MatchesBruteForceOracle) {
  const auto events = random_events(1000, 99);
  const std::vector<std::string> sources = {join(to_lines(events))};
  PipelineConfig config;
  const auto result = run_event_pipeline(sources, grid_tree(), config);
  const auto expected = oracle_segments(events, 600'000);
  ASSERT_EQ(result.segments.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(result.segments[i], expected[i]) << i;
}

TEST(PipelineTest, SegmentProperties) {
  const auto events = random_events(3000, 1234);
  const std::vector<std::string> sources = {join(to_lines(events))};
  const auto result = run_event_pipeline(sources, grid_tree(), PipelineConfig{});
  std::map<std::string, std::pair<Millis, Millis>> span;
  std::map<std::string, Millis> sum;
  Millis all = 0;
  for (const auto& s : result.segments) {
    EXPECT_LE(s.dwell_ms, 600'000);
    EXPECT_GE(s.dwell_ms, 0);
    auto [it, inserted] = span.try_emplace(s.learner_id, s.start, s.start);
    it->second.first = std::min(it->second.first, s.start);
    it->second.second = std::max(it->second.second, s.start);
    sum[s.learner_id] += s.dwell_ms;
    all += s.dwell_ms;
  }
  for (const auto& [learner, total] : sum) {
    EXPECT_LE(total, span[learner].second - span[learner].first);
  }
  EXPECT_EQ(result.attribution.total(), all);
}

TEST(PipelineTest, InvariantUnderDuplicatesPermutationAndThreads) {
  const auto events = random_events(2000, 77);
  auto lines = to_lines(events);
  const auto reference = run_event_pipeline(std::vector<std::string>{join(lines)}, grid_tree(), {});

  std::mt19937 rng(8);
  auto noisy = lines;
  for (int i = 0; i < 150; ++i) noisy.push_back(lines[rng() % lines.size()]);
  std::shuffle(noisy.begin(), noisy.end(), rng);
  // Split across two sources to exercise multi-file ingestion.
  const std::size_t half = noisy.size() / 2;
  std::vector<std::string> sources = {
      join({noisy.begin(), noisy.begin() + static_cast<std::ptrdiff_t>(half)}),
      join({noisy.begin() + static_cast<std::ptrdiff_t>(half), noisy.end()})};
  for (unsigned threads : {1u, 2u, 5u}) {
    PipelineConfig config;
    config.threads = threads;
    const auto r = run_event_pipeline(sources, grid_tree(), config);
    EXPECT_EQ(r.segments, reference.segments);
    EXPECT_EQ(r.diagnostics.duplicates_removed, 150u);
    EXPECT_EQ(r.attribution.module_totals, reference.attribution.module_totals);
    EXPECT_EQ(r.attribution.unmapped, reference.attribution.unmapped);
  }
  EXPECT_EQ(reference.diagnostics.out_of_order, 0u);
}

TEST(PipelineTest, DiagnosticsAndExclusions) {
  std::vector<std::string> lines = {
      R"({"username":"staff","time":"2018-03-01T10:00:00Z","event_type":"edit"})",
      R"({"username":"u","time":"2018-03-01T10:00:10Z","event_type":"a","page":"ch0.s0.v0.b0"})",
      R"({"username":"u","time":"2018-03-01T10:00:00Z","event_type":"a","page":"ch0.s0.v0.b0"})",
      "",
      R"({"username":"u","time":"yesterday","event_type":"a"})",
      R"({"username":"u","time":"2018-03-01T10:00:20Z","event_type":"b","page":"zzz"})",
  };
  PipelineConfig config;
  config.excluded_learners = parse_exclusion_list("# staff\nstaff\n\n");
  const auto r = run_event_pipeline(std::vector<std::string>{join(lines)}, grid_tree(), config);
  const auto& d = r.diagnostics;
  EXPECT_EQ(d.lines_read, 6u);
  EXPECT_EQ(d.excluded_events, 1u);
  EXPECT_EQ(d.records, 3u);
  EXPECT_EQ(d.skipped.at("malformed"), 1u);
  EXPECT_EQ(d.skipped.at("bad_timestamp"), 1u);
  EXPECT_EQ(d.out_of_order, 1u);
  EXPECT_EQ(d.unmapped_events, 1u);
  EXPECT_EQ(d.unmapped_refs.at("zzz"), 1u);
  EXPECT_EQ(d.skip_samples.front(), "line 4: malformed: empty line");
  EXPECT_EQ(dwells(r.segments), (std::vector<Millis>{10, 10, 0}));
}

}  // namespace
}  // namespace loscope
