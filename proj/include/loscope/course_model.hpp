#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace loscope {

// Depth in the five-level hierarchy: root=0 ... block=4.
enum class Level { kCourseRoot = 0, kChapter = 1, kSequential = 2, kVertical = 3, kBlock = 4 };

enum class BlockType { kHtml, kProblem, kVideo, kDiscussion, kOpenAssessment, kOther };

std::string_view to_string(Level level);
std::string_view to_string(BlockType type);
std::optional<Level> parse_level(std::string_view text);
std::optional<BlockType> parse_block_type(std::string_view text);

// Problems and open-response assessments carry grade points.
constexpr bool is_assessment(BlockType type) {
  return type == BlockType::kProblem || type == BlockType::kOpenAssessment;
}

struct ContentModule {
  std::string id;
  Level kind = Level::kBlock;
  BlockType block_type = BlockType::kOther;
  std::string display_name;
  std::optional<std::string> parent_id;
  int ordinal = 0;
  int depth = 0;

  bool operator==(const ContentModule&) const = default;
};

// chapter_id -> week. Week 0 marks supplemental content outside the weekly schedule.
using WeekOverrides = std::map<std::string, int>;

// Validated, immutable course hierarchy. Modules are stored in depth-first
// preorder honoring sibling ordinals, so leaf order is the course base map.
class CourseTree {
 public:
  const std::string& course_id() const noexcept { return course_id_; }
  const std::string& title() const noexcept { return title_; }
  std::size_t size() const noexcept { return modules_.size(); }

  // Preorder over the whole tree.
  std::span<const ContentModule> modules() const noexcept { return modules_; }
  const ContentModule& root() const { return modules_.front(); }

  const ContentModule* find(std::string_view id) const;
  // Throws UnknownModule.
  const ContentModule& at(std::string_view id) const;

  // Ordered children of `id`.
  std::vector<const ContentModule*> children(std::string_view id) const;
  // Ancestor (or self) at the requested level, if the module sits at or below it.
  const ContentModule* ancestor_at(std::string_view id, Level level) const;
  // Parent chain from the module itself up to the root.
  std::vector<const ContentModule*> lineage(std::string_view id) const;

  const std::vector<std::string>& leaves() const noexcept { return leaves_; }

  const WeekOverrides& week_overrides() const noexcept { return week_overrides_; }
  // Copy with the override table replaced. Throws StructuralError when a key
  // is not a chapter or a week is negative.
  CourseTree with_week_overrides(WeekOverrides overrides) const;

  bool operator==(const CourseTree& other) const {
    return course_id_ == other.course_id_ && title_ == other.title_ &&
           modules_ == other.modules_;
  }

 private:
  friend CourseTree parse_course_tree(std::string_view document);

  std::string course_id_;
  std::string title_;
  std::vector<ContentModule> modules_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::optional<std::size_t>> parent_;
  std::vector<std::string> leaves_;
  // Every suffix of every id -> module index, or kAmbiguous.
  std::unordered_map<std::string, std::size_t> suffixes_;
  WeekOverrides week_overrides_;

  static constexpr std::size_t kAmbiguous = static_cast<std::size_t>(-1);

  friend std::optional<std::string> resolve_event_ref(const CourseTree&, std::string_view);
};

// Throws MalformedDocument (unparseable / schema) or StructuralError (cycle,
// orphan, depth > 4, duplicate id, bad ordinals, kind/depth mismatch).
CourseTree parse_course_tree(std::string_view document);

// Canonical JSON document; parse_course_tree(serialize_course_tree(t)) == t.
std::string serialize_course_tree(const CourseTree& tree);

// Depth-4 leaf ids in instructor order.
std::vector<std::string> linearize(const CourseTree& tree);

// 1 + chapter ordinal unless overridden. Throws UnknownModule, NoWeek (root).
int week_of(const CourseTree& tree, std::string_view module_id);

// Exact id match, else a unique id ending in the reference's final path
// component (after the last '@' or '/'); ambiguous or missing -> nullopt.
std::optional<std::string> resolve_event_ref(const CourseTree& tree, std::string_view ref);

// Week-override CSV "chapter_id,week" (header optional).
WeekOverrides parse_week_overrides(std::string_view csv_text);

}  // namespace loscope
