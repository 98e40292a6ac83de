#include "loscope/taxonomy.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "loscope/csv.hpp"
#include "loscope/error.hpp"
#include "loscope/text.hpp"

namespace loscope {

namespace {

constexpr std::array<std::string_view, kBloomLevels> kBloomNames = {
    "Remember", "Understand", "Apply", "Analyze", "Evaluate", "Create"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view to_string(Bloom level) { return kBloomNames[static_cast<int>(level) - 1]; }

std::optional<Bloom> parse_bloom(std::string_view text) {
  text = trim(text);
  if (auto n = parse_int(text)) {
    if (*n >= 1 && *n <= kBloomLevels) return static_cast<Bloom>(*n);
    return std::nullopt;
  }
  for (int i = 0; i < kBloomLevels; ++i) {
    if (iequals(text, kBloomNames[i])) return static_cast<Bloom>(i + 1);
  }
  return std::nullopt;
}

std::string default_lo_group(std::string_view code) {
  return std::string(code.substr(0, code.find('.')));
}

LoRegistry::LoRegistry(std::vector<LearningObjective> objectives)
    : objectives_(std::move(objectives)) {
  std::sort(objectives_.begin(), objectives_.end(),
            [](const auto& a, const auto& b) { return a.code < b.code; });
}

const LearningObjective* LoRegistry::find(std::string_view code) const {
  auto it = std::lower_bound(objectives_.begin(), objectives_.end(), code,
                             [](const LearningObjective& lo, std::string_view c) { return lo.code < c; });
  return it != objectives_.end() && it->code == code ? &*it : nullptr;
}

std::vector<std::string> LoRegistry::groups() const {
  std::set<std::string> g;
  for (const auto& lo : objectives_) g.insert(lo.group);
  return {g.begin(), g.end()};
}

LoRegistry load_lo_registry(std::string_view csv_text) {
  auto rows = csv::parse(csv_text);
  csv::drop_header(rows, "code");
  std::vector<LearningObjective> out;
  std::map<std::string, std::size_t> seen;
  for (const auto& row : rows) {
    using Kind = RegistryError::Kind;
    const auto& f = row.fields;
    if (f.size() > 5) throw RegistryError(Kind::kMalformedRow, row.line_no, "too many columns");
    LearningObjective lo;
    lo.code = std::string(trim(f[0]));
    if (lo.code.empty()) throw RegistryError(Kind::kMalformedRow, row.line_no, "empty code");
    lo.group = f.size() > 1 ? std::string(trim(f[1])) : std::string();
    if (lo.group.empty()) {
      lo.group = default_lo_group(lo.code);
    } else if (lo.code.rfind(lo.group, 0) != 0) {
      throw RegistryError(Kind::kMalformedRow, row.line_no,
                          "group " + lo.group + " is not a prefix of " + lo.code);
    }
    if (f.size() > 2) lo.description = f[2];
    if (f.size() > 3 && !trim(f[3]).empty()) {
      const auto week = parse_int(f[3]);
      if (!week || *week < 0) {
        throw RegistryError(Kind::kMalformedRow, row.line_no, "week is not a non-negative integer");
      }
      lo.week = static_cast<int>(*week);
    }
    if (auto [it, inserted] = seen.emplace(lo.code, row.line_no); !inserted) {
      throw RegistryError(Kind::kDuplicateCode, row.line_no,
                          "duplicate code " + lo.code + " (first on line " +
                              std::to_string(it->second) + ")");
    }
    out.push_back(std::move(lo));
  }
  return LoRegistry(std::move(out));
}

bool TagMap::insert(TagRecord record) {
  auto key = record.module_id;
  return tags_.emplace(std::move(key), std::move(record)).second;
}

const TagRecord* TagMap::find(std::string_view module_id) const {
  auto it = tags_.find(std::string(module_id));
  return it == tags_.end() ? nullptr : &it->second;
}

const TagRecord* TagMap::effective(const CourseTree& tree, std::string_view module_id) const {
  if (tree.find(module_id) == nullptr) return find(module_id);
  for (const auto* m : tree.lineage(module_id)) {
    if (const auto* t = find(m->id)) return t;
  }
  return nullptr;
}

TagLoad load_tags(std::string_view csv_text, const LoRegistry& registry, const CourseTree& tree) {
  auto rows = csv::parse(csv_text);
  csv::drop_header(rows, "module_id");
  TagLoad out;
  for (const auto& row : rows) {
    std::vector<std::string> problems;
    const auto& f = row.fields;
    const std::string module_id = f.empty() ? std::string() : std::string(trim(f[0]));
    if (f.size() != 3) {
      out.violations.push_back({row.line_no, module_id, "expected 3 columns"});
      continue;
    }
    if (tree.find(module_id) == nullptr) problems.push_back("unknown module");

    TagRecord rec;
    rec.module_id = module_id;
    for (const auto& part : split(f[1], ';')) {
      const auto code = trim(part);
      if (!code.empty()) rec.lo_codes.emplace_back(code);
    }
    if (rec.lo_codes.empty()) problems.push_back("no LOs");
    if (rec.lo_codes.size() > kMaxLosPerActivity) problems.push_back("too many LOs");
    std::set<std::string> distinct(rec.lo_codes.begin(), rec.lo_codes.end());
    if (distinct.size() != rec.lo_codes.size()) problems.push_back("duplicate LO");
    for (const auto& code : distinct) {
      if (!registry.contains(code)) problems.push_back("unknown LO " + code);
    }
    const auto bloom = parse_bloom(f[2]);
    if (!bloom) problems.push_back("invalid bloom level \"" + f[2] + "\"");
    else rec.bloom = *bloom;
    if (problems.empty() && out.tags.find(module_id) != nullptr) {
      problems.push_back("module tagged more than once");
    }

    if (problems.empty()) {
      out.tags.insert(std::move(rec));
    } else {
      for (auto& p : problems) out.violations.push_back({row.line_no, module_id, std::move(p)});
    }
  }
  if (out.tags.empty()) {
    throw RegistryError(RegistryError::Kind::kNoValidRows, rows.empty() ? 0 : rows.back().line_no,
                        "tag file has no valid rows");
  }
  return out;
}

CoverageReport coverage_report(const CourseTree& tree, const TagMap& tags,
                               const LoRegistry& registry,
                               const std::set<std::string>& graded_sequentials) {
  CoverageReport report;
  for (const auto& lo : registry.objectives()) report.tag_histogram[lo.code] = 0;
  for (const auto& [id, rec] : tags) {
    for (const auto& code : rec.lo_codes) ++report.tag_histogram[code];
  }

  std::set<std::string> assessed;
  for (const auto& leaf : tree.leaves()) {
    const auto* tag = tags.effective(tree, leaf);
    if (tag == nullptr) {
      report.untagged_leaves.push_back(leaf);
      continue;
    }
    const auto& m = tree.at(leaf);
    if (!is_assessment(m.block_type)) continue;
    const auto* seq = tree.ancestor_at(leaf, Level::kSequential);
    if (seq == nullptr || !graded_sequentials.count(seq->id)) continue;
    assessed.insert(tag->lo_codes.begin(), tag->lo_codes.end());
  }

  for (const auto& lo : registry.objectives()) {
    if (report.tag_histogram[lo.code] == 0) report.los_without_tags.push_back(lo.code);
    else if (!assessed.count(lo.code)) report.los_without_assessment.push_back(lo.code);
  }
  return report;
}

}  // namespace loscope
