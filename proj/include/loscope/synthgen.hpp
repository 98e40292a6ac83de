#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace loscope::synth {

using LevelWeights = std::array<double, 6>;

struct DefectSpec {
  std::size_t untagged_leaves = 0;
  bool assessment_free_lo = false;
  std::size_t duplicate_lines = 0;
  std::size_t out_of_order = 0;            // disjoint adjacent swaps
  std::size_t zero_possible_per_learner = 0;

  bool any() const {
    return untagged_leaves || assessment_free_lo || duplicate_lines || out_of_order ||
           zero_possible_per_learner;
  }
};

struct CohortSpec {
  std::size_t n_learners = 930;
  std::size_t weeks = 6;
  std::size_t activities_total = 983;
  std::size_t lo_count = 31;
  double planted_rho = 0.56;
  // One row shared by every week, or one row per week.
  std::vector<LevelWeights> bloom_profile = {{0.30, 0.50, 0.10, 0.05, 0.03, 0.02}};
  LevelWeights supplemental_bloom = {0.05, 0.25, 0.30, 0.25, 0.10, 0.05};
  double break_s = 600;
  std::uint64_t seed = 42;
  std::size_t events_per_learner = 60;  // lower bound; heavy learners get more
  double supplemental_fraction = 0.15;  // of activities_total, placed in a week-0 chapter
  std::size_t staff_learners = 0;       // extra learners listed in exclusions.txt
  DefectSpec defects;

  // Throws SpecError.
  void validate() const;
  const LevelWeights& week_profile(std::size_t week) const;  // 1-based
};

// Keys mirror the field names; absent keys keep defaults. Throws SpecError.
CohortSpec parse_cohort_spec(std::string_view json_text);
nlohmann::json to_json(const CohortSpec& spec);

struct SynthLeaf {
  std::string id;
  std::string type;  // html | video | problem
  std::size_t chapter = 0;
  std::size_t sequential = 0;  // index into SynthCourse::sequentials
  int week = 0;
  std::vector<std::string> los;  // empty when left untagged
  int bloom = 0;
};

struct SynthSequential {
  std::string id;
  std::size_t chapter = 0;
  std::size_t problems = 0;
};

struct SynthChapter {
  std::string id;
  int week = 0;  // 0 = supplemental
};

struct SynthCourse {
  std::string course_json;
  std::string registry_csv;
  std::string tags_csv;
  std::string week_overrides_csv;

  std::vector<SynthChapter> chapters;
  std::vector<SynthSequential> sequentials;
  std::vector<SynthLeaf> leaves;  // base-map order
  std::vector<std::string> lo_codes;
  std::size_t module_count = 0;

  std::vector<std::string> untagged_leaves;       // planted
  std::optional<std::string> assessment_free_lo;  // planted
};

// Five-level tree with spec.weeks weekly chapters (plus one week-0 chapter
// when the supplemental share rounds to at least one activity), LO registry
// and tag file. Every LO lands on at least one problem unless planted otherwise.
SynthCourse gen_course(const CohortSpec& spec);

struct LearnerTruth {
  std::int64_t dwell_ms = 0;  // mapped + unmapped
  std::int64_t unmapped_ms = 0;
  std::size_t events = 0;
  double grade = 0;
  bool passed = false;
};

struct GroundTruth {
  std::map<std::string, LearnerTruth> learners;
  std::map<std::string, std::int64_t> module_dwell_ms;  // summed over learners
  // (learner, lo) -> (earned, possible)
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> lo_grades;
  std::map<int, std::array<std::size_t, 6>> bloom_counts;  // week -> per-level count
  std::map<std::pair<std::string, std::string>, std::size_t> bipartite;  // (chapter, lo) -> weight
  double realized_r = 0;
  std::size_t n = 0;

  std::size_t event_lines = 0;
  std::size_t tagged_activities = 0;
  std::size_t subsection_rows = 0;
  std::vector<std::string> staff;

  std::vector<std::string> untagged_leaves;
  std::optional<std::string> assessment_free_lo;
  std::size_t duplicate_lines = 0;
  std::size_t out_of_order = 0;
  std::size_t zero_possible_rows = 0;

  nlohmann::json to_json() const;
};

struct SynthCohort {
  std::vector<std::string> event_files;  // ndjson contents, learners in sorted order
  std::string subsection_csv;
  std::string final_csv;
  std::string exclusions;
  GroundTruth truth;
};

// Dwell is realized as events whose within-session gaps stay below break_s,
// so sessionizing (zero terminal dwell) recovers GroundTruth to the millisecond.
SynthCohort gen_cohort(const CohortSpec& spec, const SynthCourse& course, unsigned threads = 1);

// Clean base plus one variant per defect class, named for the defect.
std::vector<std::pair<std::string, CohortSpec>> plant_defects(const CohortSpec& base);

// Relative paths of the emitted fixture files.
struct FixtureLayout {
  static constexpr const char* kCourse = "course.json";
  static constexpr const char* kRegistry = "lo_registry.csv";
  static constexpr const char* kTags = "tags.csv";
  static constexpr const char* kWeekOverrides = "week_overrides.csv";
  static constexpr const char* kEventsDir = "events";
  static constexpr const char* kSubsection = "subsection_grades.csv";
  static constexpr const char* kFinal = "final_grades.csv";
  static constexpr const char* kExclusions = "exclusions.txt";
  static constexpr const char* kTruth = "ground_truth.json";
  static constexpr const char* kSpec = "synth_spec.json";
};

struct WrittenFixture {
  std::vector<std::pair<std::string, std::string>> manifest;  // (relative path, sha256)
  GroundTruth truth;
};

// Generates and writes every fixture file under out_dir. Throws SpecError, IoError.
WrittenFixture write_fixture(const CohortSpec& spec, const std::filesystem::path& out_dir,
                             unsigned threads = 1);

}  // namespace loscope::synth
