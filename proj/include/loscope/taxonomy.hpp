#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "loscope/course_model.hpp"

namespace loscope {

// Revised Bloom's taxonomy, ordered by cognitive complexity.
enum class Bloom { kRemember = 1, kUnderstand, kApply, kAnalyze, kEvaluate, kCreate };

inline constexpr int kBloomLevels = 6;

std::string_view to_string(Bloom level);
// "1".."6" or a level name (case-insensitive).
std::optional<Bloom> parse_bloom(std::string_view text);

struct LearningObjective {
  std::string code;   // e.g. "LO2.1"
  std::string group;  // e.g. "LO2"
  std::string description;
  std::optional<int> week;

  bool operator==(const LearningObjective&) const = default;
};

// Code prefix before the first '.', or the whole code.
std::string default_lo_group(std::string_view code);

class LoRegistry {
 public:
  LoRegistry() = default;
  explicit LoRegistry(std::vector<LearningObjective> objectives);

  // Ascending by code.
  const std::vector<LearningObjective>& objectives() const noexcept { return objectives_; }
  const LearningObjective* find(std::string_view code) const;
  bool contains(std::string_view code) const { return find(code) != nullptr; }
  std::vector<std::string> groups() const;
  std::size_t size() const noexcept { return objectives_.size(); }

 private:
  std::vector<LearningObjective> objectives_;
};

// CSV "code,group,description,week[,weight]"; header optional, weight ignored.
// Throws RegistryError (kDuplicateCode, kMalformedRow) with the line number.
LoRegistry load_lo_registry(std::string_view csv_text);

struct TagRecord {
  std::string module_id;
  std::vector<std::string> lo_codes;  // 1..3, distinct, file order
  Bloom bloom = Bloom::kRemember;

  bool operator==(const TagRecord&) const = default;
};

inline constexpr std::size_t kMaxLosPerActivity = 3;

class TagMap {
 public:
  using Map = std::map<std::string, TagRecord>;

  bool insert(TagRecord record);
  const TagRecord* find(std::string_view module_id) const;
  // Tag on the module itself, else on its nearest tagged ancestor.
  const TagRecord* effective(const CourseTree& tree, std::string_view module_id) const;

  std::size_t size() const noexcept { return tags_.size(); }
  bool empty() const noexcept { return tags_.empty(); }
  Map::const_iterator begin() const { return tags_.begin(); }
  Map::const_iterator end() const { return tags_.end(); }

 private:
  Map tags_;
};

struct TagViolation {
  std::size_t line_no = 0;
  std::string module_id;
  std::string reason;
};

struct TagLoad {
  TagMap tags;
  std::vector<TagViolation> violations;
};

// CSV "module_id,lo_codes,bloom_level" with lo_codes ';'-separated.
// Invalid rows are excluded and reported; throws RegistryError(kNoValidRows)
// when nothing survives.
TagLoad load_tags(std::string_view csv_text, const LoRegistry& registry, const CourseTree& tree);

struct CoverageReport {
  std::vector<std::string> untagged_leaves;        // base-map order
  std::vector<std::string> los_without_tags;       // never tagged
  std::vector<std::string> los_without_assessment; // tagged, but never on a graded activity
  std::map<std::string, std::size_t> tag_histogram;

  bool clean() const {
    return untagged_leaves.empty() && los_without_tags.empty() && los_without_assessment.empty();
  }
};

// A graded activity is an assessment block whose sequential is in
// `graded_sequentials` (sequentials with possible > 0).
CoverageReport coverage_report(const CourseTree& tree, const TagMap& tags,
                               const LoRegistry& registry,
                               const std::set<std::string>& graded_sequentials);

}  // namespace loscope
