#include "loscope/grading.hpp"

#include <utility>

#include "loscope/csv.hpp"
#include "loscope/error.hpp"
#include "loscope/text.hpp"

namespace loscope {

SubsectionLoad load_subsection_grades(std::string_view csv_text, const CourseTree& tree) {
  auto rows = csv::parse(csv_text);
  csv::drop_header(rows, "learner_id");
  SubsectionLoad out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& row : rows) {
    const auto& f = row.fields;
    auto issue = [&](std::string reason) { out.issues.push_back({row.line_no, std::move(reason)}); };
    if (f.size() != 4) {
      issue("expected 4 columns");
      continue;
    }
    SubsectionGrade g;
    g.learner_id = std::string(trim(f[0]));
    g.sequential_id = std::string(trim(f[1]));
    const auto earned = parse_double(f[2]);
    const auto possible = parse_double(f[3]);
    if (g.learner_id.empty()) {
      issue("empty learner_id");
      continue;
    }
    const auto* m = tree.find(g.sequential_id);
    if (m == nullptr || m->kind != Level::kSequential) {
      issue("unknown sequential " + g.sequential_id);
      continue;
    }
    if (!earned || !possible) {
      issue("points are not numeric");
      continue;
    }
    if (*earned < 0 || *possible < 0) {
      issue("negative points");
      continue;
    }
    if (*earned > *possible) {
      issue("earned exceeds possible");
      continue;
    }
    if (!seen.emplace(g.learner_id, g.sequential_id).second) {
      issue("duplicate learner/sequential row");
      continue;
    }
    g.earned = *earned;
    g.possible = *possible;
    out.records.push_back(std::move(g));
  }
  return out;
}

ZeroPossibleFilter filter_zero_possible(std::vector<SubsectionGrade> records) {
  ZeroPossibleFilter out;
  out.kept.reserve(records.size());
  for (auto& r : records) {
    if (r.possible == 0) ++out.dropped;
    else out.kept.push_back(std::move(r));
  }
  return out;
}

std::set<std::string> graded_sequentials(std::span<const SubsectionGrade> records) {
  std::set<std::string> out;
  for (const auto& r : records) {
    if (r.possible > 0) out.insert(r.sequential_id);
  }
  return out;
}

std::vector<std::string> sequential_los(const CourseTree& tree, const TagMap& tags,
                                        std::string_view sequential_id) {
  if (const auto* own = tags.find(sequential_id)) {
    std::set<std::string> s(own->lo_codes.begin(), own->lo_codes.end());
    return {s.begin(), s.end()};
  }
  std::set<std::string> codes;
  std::vector<const ContentModule*> stack = tree.children(sequential_id);
  while (!stack.empty()) {
    const auto* m = stack.back();
    stack.pop_back();
    if (m->kind == Level::kBlock) {
      if (!is_assessment(m->block_type)) continue;
      if (const auto* t = tags.effective(tree, m->id)) codes.insert(t->lo_codes.begin(), t->lo_codes.end());
    } else {
      for (const auto* c : tree.children(m->id)) stack.push_back(c);
    }
  }
  return {codes.begin(), codes.end()};
}

LoAggregation aggregate_by_lo(std::span<const SubsectionGrade> records, const TagMap& tags,
                              const CourseTree& tree) {
  std::map<std::string, std::vector<std::string>> los_of;
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> sums;
  LoAggregation out;
  for (const auto& r : records) {
    auto it = los_of.find(r.sequential_id);
    if (it == los_of.end()) {
      it = los_of.emplace(r.sequential_id, sequential_los(tree, tags, r.sequential_id)).first;
    }
    if (it->second.empty()) {
      out.untagged_points[r.sequential_id] += r.possible;
      continue;
    }
    for (const auto& code : it->second) {
      auto& [earned, possible] = sums[{r.learner_id, code}];
      earned += r.earned;
      possible += r.possible;
    }
  }
  out.grades.reserve(sums.size());
  for (const auto& [key, pts] : sums) {
    if (pts.second <= 0) continue;
    out.grades.push_back(LoGrade{key.first, key.second, pts.first, pts.second, pts.first / pts.second});
  }
  return out;
}

FinalLoad load_final_grades(std::string_view csv_text, double pass_threshold) {
  if (!(pass_threshold >= 0.0 && pass_threshold <= 1.0)) {
    throw Error("pass threshold must be in [0, 1]");
  }
  auto rows = csv::parse(csv_text);
  csv::drop_header(rows, "learner_id");
  FinalLoad out;
  std::set<std::string> seen;
  for (const auto& row : rows) {
    const auto& f = row.fields;
    auto issue = [&](std::string reason) { out.issues.push_back({row.line_no, std::move(reason)}); };
    if (f.size() < 2 || f.size() > 3) {
      issue("expected learner_id,grade,certificate");
      continue;
    }
    FinalGrade g;
    g.learner_id = std::string(trim(f[0]));
    const auto grade = parse_double(f[1]);
    if (g.learner_id.empty()) {
      issue("empty learner_id");
      continue;
    }
    if (!grade || *grade < 0.0 || *grade > 1.0) {
      issue("grade is not a fraction in [0, 1]");
      continue;
    }
    g.grade = *grade;
    const std::string cert = f.size() == 3 ? std::string(trim(f[2])) : std::string();
    if (cert == "earned") g.passed = true;
    else if (cert == "notpassing") g.passed = false;
    else if (cert.empty()) g.passed = g.grade >= pass_threshold;
    else {
      issue("unknown certificate status \"" + cert + "\"");
      continue;
    }
    if (!seen.insert(g.learner_id).second) {
      issue("duplicate learner " + g.learner_id);
      continue;
    }
    out.records.push_back(std::move(g));
  }
  return out;
}

}  // namespace loscope
