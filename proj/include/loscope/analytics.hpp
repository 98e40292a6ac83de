#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loscope/course_model.hpp"
#include "loscope/event_pipeline.hpp"
#include "loscope/grading.hpp"
#include "loscope/stats.hpp"
#include "loscope/taxonomy.hpp"

namespace loscope {

struct CorrelationResult {
  double r = 0;
  double p = 1;
  std::size_t n = 0;
  std::size_t excluded_missing_grade = 0;  // dwell but no final grade
  std::size_t excluded_missing_dwell = 0;  // final grade but no events
  std::optional<double> spearman;
};

// Joins per-learner total dwell (seconds) with final grades on learner_id.
// p is 0 when |r| == 1. Throws DegenerateInput when fewer than 3 learners
// join or either variable is constant.
CorrelationResult engagement_performance(const std::map<std::string, double>& dwell_s,
                                         std::span<const FinalGrade> finals,
                                         bool with_spearman = false);

struct LoDwell {
  std::string lo_code;
  std::string lo_group;
  double total_s = 0;
  double mean_s = 0;    // over engaged learners
  double median_s = 0;  // over engaged learners
  std::size_t engaged_n = 0;  // learners with dwell > 0 on the LO

  double mean_min() const { return mean_s / 60.0; }
  double total_min() const { return total_s / 60.0; }
};

struct LoDwellSummary {
  std::vector<LoDwell> rows;  // every registry LO, ascending code
  Millis untagged_ms = 0;     // mapped dwell on modules with no effective tag
};

// A module's dwell counts in full toward every LO of its effective tag.
LoDwellSummary lo_dwell_summary(const Attribution& attribution, const TagMap& tags,
                                const CourseTree& tree, const LoRegistry& registry);

enum class Segment { kAll, kPassed, kNotPassed };

std::string_view to_string(Segment segment);
std::optional<Segment> parse_segment(std::string_view text);

struct LoBox {
  std::string lo_code;
  std::string lo_group;
  stats::BoxStats box;  // over pct values
};

struct LoGradeBoxes {
  Segment segment = Segment::kAll;
  std::vector<LoBox> boxes;         // ascending code; LOs without data omitted
  std::vector<std::string> omitted; // registry LOs with no data in this segment
};

// kAll covers every learner with LO grades; kPassed / kNotPassed require a final grade.
LoGradeBoxes lo_grade_box(std::span<const LoGrade> grades, std::span<const FinalGrade> finals,
                          Segment segment, const LoRegistry& registry);

struct BloomCell {
  int week = 0;
  Bloom level = Bloom::kRemember;
  std::size_t count = 0;
  double pct = 0;  // of that week's tagged activities
};

struct BloomDistribution {
  std::vector<BloomCell> cells;  // ascending (week, level); six cells per week
  std::vector<int> untagged_weeks;
  std::size_t unplaced = 0;      // tags outside any chapter
};

// Weeks come from week_of on each chapter (overrides honored; week 0 = supplemental).
BloomDistribution bloom_distribution(const TagMap& tags, const CourseTree& tree);

struct BipartiteGroup {
  std::string group_id;  // chapter id
  std::string label;
  int ordinal = 0;
  int week = 0;
  std::size_t activities = 0;  // tag records inside the chapter
};

struct BipartiteEdge {
  std::string group_id;
  std::string lo_code;
  std::size_t weight = 0;
};

struct BipartiteMap {
  std::vector<BipartiteGroup> groups;  // chapter order
  std::vector<BipartiteEdge> edges;    // ascending (group_id, lo_code), weight > 0
};

BipartiteMap bipartite_edges(const CourseTree& tree, const TagMap& tags);

}  // namespace loscope
