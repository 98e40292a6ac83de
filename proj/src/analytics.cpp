#include "loscope/analytics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <unordered_map>

#include "loscope/error.hpp"

namespace loscope {

CorrelationResult engagement_performance(const std::map<std::string, double>& dwell_s,
                                         std::span<const FinalGrade> finals, bool with_spearman) {
  std::map<std::string, double> grade_of;
  for (const auto& f : finals) grade_of.emplace(f.learner_id, f.grade);

  CorrelationResult out;
  std::vector<double> x, y;
  for (const auto& [learner, dwell] : dwell_s) {
    auto it = grade_of.find(learner);
    if (it == grade_of.end()) {
      ++out.excluded_missing_grade;
      continue;
    }
    x.push_back(dwell);
    y.push_back(it->second);
  }
  for (const auto& [learner, grade] : grade_of) {
    if (!dwell_s.count(learner)) ++out.excluded_missing_dwell;
  }
  out.n = x.size();
  out.r = stats::pearson(x, y);
  out.p = std::fabs(out.r) < 1.0 ? stats::p_value_two_tailed(out.r, out.n) : 0.0;
  if (with_spearman) out.spearman = stats::spearman(x, y);
  return out;
}

LoDwellSummary lo_dwell_summary(const Attribution& attribution, const TagMap& tags,
                                const CourseTree& tree, const LoRegistry& registry) {
  std::unordered_map<std::string, const TagRecord*> tag_of;
  std::map<std::string, std::map<std::string, Millis>> per_lo;  // lo -> learner -> ms
  LoDwellSummary out;
  for (const auto& [key, ms] : attribution.module_totals) {
    const auto& [learner, module] = key;
    auto it = tag_of.find(module);
    if (it == tag_of.end()) it = tag_of.emplace(module, tags.effective(tree, module)).first;
    if (it->second == nullptr) {
      out.untagged_ms += ms;
      continue;
    }
    for (const auto& code : it->second->lo_codes) per_lo[code][learner] += ms;
  }

  for (const auto& lo : registry.objectives()) {
    LoDwell row;
    row.lo_code = lo.code;
    row.lo_group = lo.group;
    std::vector<double> engaged;
    Millis total = 0;
    if (auto it = per_lo.find(lo.code); it != per_lo.end()) {
      for (const auto& [learner, ms] : it->second) {
        total += ms;
        if (ms > 0) engaged.push_back(static_cast<double>(ms) / 1000.0);
      }
    }
    row.total_s = static_cast<double>(total) / 1000.0;
    row.engaged_n = engaged.size();
    if (!engaged.empty()) {
      row.mean_s = row.total_s / static_cast<double>(engaged.size());
      std::sort(engaged.begin(), engaged.end());
      row.median_s = stats::quantile_sorted(engaged, 0.5);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string_view to_string(Segment segment) {
  switch (segment) {
    case Segment::kAll: return "all";
    case Segment::kPassed: return "passed";
    case Segment::kNotPassed: return "not_passed";
  }
  return "all";
}

std::optional<Segment> parse_segment(std::string_view text) {
  for (auto s : {Segment::kAll, Segment::kPassed, Segment::kNotPassed}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

LoGradeBoxes lo_grade_box(std::span<const LoGrade> grades, std::span<const FinalGrade> finals,
                          Segment segment, const LoRegistry& registry) {
  std::map<std::string, bool> passed;
  for (const auto& f : finals) passed.emplace(f.learner_id, f.passed);

  std::map<std::string, std::vector<double>> pcts;
  for (const auto& g : grades) {
    if (segment != Segment::kAll) {
      auto it = passed.find(g.learner_id);
      if (it == passed.end() || it->second != (segment == Segment::kPassed)) continue;
    }
    pcts[g.lo_code].push_back(g.pct);
  }

  LoGradeBoxes out;
  out.segment = segment;
  for (const auto& lo : registry.objectives()) {
    auto it = pcts.find(lo.code);
    if (it == pcts.end() || it->second.empty()) {
      out.omitted.push_back(lo.code);
      continue;
    }
    out.boxes.push_back(LoBox{lo.code, lo.group, stats::box_stats(it->second)});
  }
  return out;
}

BloomDistribution bloom_distribution(const TagMap& tags, const CourseTree& tree) {
  std::map<int, std::array<std::size_t, kBloomLevels>> counts;
  for (const auto& m : tree.modules()) {
    if (m.kind == Level::kChapter) counts.try_emplace(week_of(tree, m.id));
  }
  BloomDistribution out;
  for (const auto& [id, rec] : tags) {
    const auto* chapter = tree.ancestor_at(id, Level::kChapter);
    if (chapter == nullptr) {
      ++out.unplaced;
      continue;
    }
    ++counts[week_of(tree, chapter->id)][static_cast<int>(rec.bloom) - 1];
  }
  for (const auto& [week, levels] : counts) {
    std::size_t total = 0;
    for (auto c : levels) total += c;
    if (total == 0) out.untagged_weeks.push_back(week);
    for (int l = 0; l < kBloomLevels; ++l) {
      const double pct = total ? static_cast<double>(levels[l]) / static_cast<double>(total) : 0.0;
      out.cells.push_back(BloomCell{week, static_cast<Bloom>(l + 1), levels[l], pct});
    }
  }
  return out;
}

BipartiteMap bipartite_edges(const CourseTree& tree, const TagMap& tags) {
  BipartiteMap out;
  std::map<std::string, std::size_t> group_slot;
  for (const auto* chapter : tree.children(tree.root().id)) {
    group_slot.emplace(chapter->id, out.groups.size());
    out.groups.push_back(BipartiteGroup{chapter->id, chapter->display_name, chapter->ordinal,
                                        week_of(tree, chapter->id), 0});
  }
  std::map<std::pair<std::string, std::string>, std::size_t> weights;
  for (const auto& [id, rec] : tags) {
    const auto* chapter = tree.ancestor_at(id, Level::kChapter);
    if (chapter == nullptr) continue;
    ++out.groups[group_slot.at(chapter->id)].activities;
    for (const auto& code : rec.lo_codes) ++weights[{chapter->id, code}];
  }
  for (const auto& [key, w] : weights) out.edges.push_back(BipartiteEdge{key.first, key.second, w});
  return out;
}

}  // namespace loscope
