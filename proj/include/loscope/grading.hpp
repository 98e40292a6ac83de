#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loscope/course_model.hpp"
#include "loscope/taxonomy.hpp"

namespace loscope {

struct SubsectionGrade {
  std::string learner_id;
  std::string sequential_id;
  double earned = 0;
  double possible = 0;

  bool operator==(const SubsectionGrade&) const = default;
};

struct LoGrade {
  std::string learner_id;
  std::string lo_code;
  double earned = 0;
  double possible = 0;
  double pct = 0;

  bool operator==(const LoGrade&) const = default;
};

struct FinalGrade {
  std::string learner_id;
  double grade = 0;
  bool passed = false;

  bool operator==(const FinalGrade&) const = default;
};

struct RowIssue {
  std::size_t line_no = 0;
  std::string reason;
};

struct SubsectionLoad {
  std::vector<SubsectionGrade> records;  // file order
  std::vector<RowIssue> issues;
};

// CSV "learner_id,sequential_id,earned,possible" (header optional).
SubsectionLoad load_subsection_grades(std::string_view csv_text, const CourseTree& tree);

struct ZeroPossibleFilter {
  std::vector<SubsectionGrade> kept;
  std::size_t dropped = 0;
};

ZeroPossibleFilter filter_zero_possible(std::vector<SubsectionGrade> records);

// Sequentials with possible > 0 in at least one record.
std::set<std::string> graded_sequentials(std::span<const SubsectionGrade> records);

// LOs that a sequential's points count toward: its own tag, else the union of
// the effective tags of its assessment blocks. Sorted; empty when neither exists.
std::vector<std::string> sequential_los(const CourseTree& tree, const TagMap& tags,
                                        std::string_view sequential_id);

struct LoAggregation {
  std::vector<LoGrade> grades;                 // ascending (learner_id, lo_code)
  std::map<std::string, double> untagged_points;  // sequential_id -> possible points with no LO
};

// Each record's points count in full toward every LO of its sequential.
LoAggregation aggregate_by_lo(std::span<const SubsectionGrade> records, const TagMap& tags,
                              const CourseTree& tree);

struct FinalLoad {
  std::vector<FinalGrade> records;  // file order
  std::vector<RowIssue> issues;
};

inline constexpr double kDefaultPassThreshold = 0.60;

// CSV "learner_id,grade,certificate" with certificate in {earned, notpassing, ""}.
// Certificate status decides `passed` when present; otherwise grade >= threshold.
// Throws Error when the threshold is outside [0, 1].
FinalLoad load_final_grades(std::string_view csv_text, double pass_threshold = kDefaultPassThreshold);

}  // namespace loscope
