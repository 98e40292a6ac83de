#include "loscope/course_model.hpp"

#include <algorithm>
#include <array>
#include <nlohmann/json.hpp>

#include "loscope/csv.hpp"
#include "loscope/error.hpp"
#include "loscope/text.hpp"

namespace loscope {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, 5> kLevelNames = {"course_root", "chapter", "sequential",
                                                         "vertical", "block"};
constexpr std::array<std::string_view, 6> kBlockTypeNames = {
    "html", "problem", "video", "discussion", "openassessment", "other"};

struct RawModule {
  ContentModule module;
  std::optional<int> ordinal;
};

std::string string_field(const json& obj, const char* key, std::size_t pos, bool required) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) {
      throw MalformedDocument("modules[" + std::to_string(pos) + "] missing \"" + key + "\"");
    }
    return {};
  }
  if (!it->is_string()) {
    throw MalformedDocument("modules[" + std::to_string(pos) + "]." + key + " is not a string");
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(Level level) { return kLevelNames[static_cast<std::size_t>(level)]; }

std::string_view to_string(BlockType type) {
  return kBlockTypeNames[static_cast<std::size_t>(type)];
}

std::optional<Level> parse_level(std::string_view text) {
  for (std::size_t i = 0; i < kLevelNames.size(); ++i) {
    if (kLevelNames[i] == text) return static_cast<Level>(i);
  }
  return std::nullopt;
}

std::optional<BlockType> parse_block_type(std::string_view text) {
  for (std::size_t i = 0; i < kBlockTypeNames.size(); ++i) {
    if (kBlockTypeNames[i] == text) return static_cast<BlockType>(i);
  }
  return std::nullopt;
}

CourseTree parse_course_tree(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw MalformedDocument(std::string("course structure is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw MalformedDocument("course structure must be a JSON object");
  for (const char* key : {"course_id", "title"}) {
    if (!doc.contains(key) || !doc[key].is_string()) {
      throw MalformedDocument(std::string("course structure missing string \"") + key + "\"");
    }
  }
  if (!doc.contains("modules") || !doc["modules"].is_array()) {
    throw MalformedDocument("course structure missing \"modules\" array");
  }

  std::vector<RawModule> raw;
  raw.reserve(doc["modules"].size());
  std::size_t pos = 0;
  for (const auto& m : doc["modules"]) {
    if (!m.is_object()) {
      throw MalformedDocument("modules[" + std::to_string(pos) + "] is not an object");
    }
    RawModule r;
    r.module.id = string_field(m, "id", pos, true);
    if (r.module.id.empty()) {
      throw MalformedDocument("modules[" + std::to_string(pos) + "] has an empty id");
    }
    const auto kind = parse_level(string_field(m, "kind", pos, true));
    if (!kind) throw StructuralError(r.module.id, "unknown module kind");
    r.module.kind = *kind;
    const auto block_type_text = string_field(m, "block_type", pos, false);
    if (!block_type_text.empty()) {
      const auto bt = parse_block_type(block_type_text);
      if (!bt) throw StructuralError(r.module.id, "unknown block_type \"" + block_type_text + "\"");
      r.module.block_type = *bt;
    }
    r.module.display_name = string_field(m, "display_name", pos, false);
    if (auto it = m.find("parent_id"); it != m.end() && !it->is_null()) {
      if (!it->is_string()) throw MalformedDocument(r.module.id + ": parent_id is not a string");
      r.module.parent_id = it->get<std::string>();
    }
    if (auto it = m.find("ordinal"); it != m.end() && !it->is_null()) {
      if (!it->is_number_integer() || it->get<long long>() < 0) {
        throw StructuralError(r.module.id, "ordinal must be a non-negative integer");
      }
      r.ordinal = it->get<int>();
    }
    raw.push_back(std::move(r));
    ++pos;
  }

  std::unordered_map<std::string, std::size_t> by_id;
  std::optional<std::size_t> root;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!by_id.emplace(raw[i].module.id, i).second) {
      throw StructuralError(raw[i].module.id, "duplicate module id");
    }
    if (!raw[i].module.parent_id) {
      if (root) throw StructuralError(raw[i].module.id, "more than one root module");
      root = i;
    }
  }
  if (!root) {
    throw StructuralError(raw.empty() ? std::string("<none>") : raw.front().module.id,
                          "no root module");
  }

  // Children in file order, then ordinals (missing ordinal = file-order slot).
  std::vector<std::vector<std::size_t>> kids(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& parent = raw[i].module.parent_id;
    if (!parent) continue;
    auto it = by_id.find(*parent);
    if (it == by_id.end()) throw StructuralError(raw[i].module.id, "parent does not exist");
    kids[it->second].push_back(i);
  }
  for (auto& siblings : kids) {
    std::vector<char> seen(siblings.size(), 0);
    for (std::size_t slot = 0; slot < siblings.size(); ++slot) {
      auto& r = raw[siblings[slot]];
      const int ord = r.ordinal.value_or(static_cast<int>(slot));
      if (ord >= static_cast<int>(siblings.size()) || seen[static_cast<std::size_t>(ord)]) {
        throw StructuralError(r.module.id, "sibling ordinals are not contiguous from 0");
      }
      seen[static_cast<std::size_t>(ord)] = 1;
      r.module.ordinal = ord;
    }
    std::sort(siblings.begin(), siblings.end(), [&](std::size_t a, std::size_t b) {
      return raw[a].module.ordinal < raw[b].module.ordinal;
    });
  }

  CourseTree tree;
  tree.course_id_ = doc["course_id"].get<std::string>();
  tree.title_ = doc["title"].get<std::string>();
  tree.modules_.reserve(raw.size());

  std::vector<char> reached(raw.size(), 0);
  std::vector<std::size_t> raw_to_tree(raw.size(), 0);
  // Iterative preorder: (raw index, depth).
  std::vector<std::pair<std::size_t, int>> stack{{*root, 0}};
  while (!stack.empty()) {
    auto [idx, depth] = stack.back();
    stack.pop_back();
    reached[idx] = 1;
    auto& m = raw[idx].module;
    if (depth > 4) throw StructuralError(m.id, "depth exceeds 4");
    if (static_cast<int>(m.kind) != depth) {
      throw StructuralError(m.id, "kind " + std::string(to_string(m.kind)) +
                                      " inconsistent with depth " + std::to_string(depth));
    }
    m.depth = depth;
    raw_to_tree[idx] = tree.modules_.size();
    tree.modules_.push_back(m);
    for (auto it = kids[idx].rbegin(); it != kids[idx].rend(); ++it) {
      stack.emplace_back(*it, depth + 1);
    }
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!reached[i]) throw StructuralError(raw[i].module.id, "cycle: module unreachable from root");
  }

  const std::size_t n = tree.modules_.size();
  tree.children_.assign(n, {});
  tree.parent_.assign(n, std::nullopt);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::size_t t = raw_to_tree[i];
    for (std::size_t k : kids[i]) {
      tree.children_[t].push_back(raw_to_tree[k]);
      tree.parent_[raw_to_tree[k]] = t;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = tree.modules_[i];
    tree.index_.emplace(m.id, i);
    if (m.depth == 4) tree.leaves_.push_back(m.id);
    for (std::size_t s = 0; s < m.id.size(); ++s) {
      auto [it, inserted] = tree.suffixes_.emplace(m.id.substr(s), i);
      if (!inserted && it->second != i) it->second = CourseTree::kAmbiguous;
    }
  }
  return tree;
}

const ContentModule* CourseTree::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &modules_[it->second];
}

const ContentModule& CourseTree::at(std::string_view id) const {
  const auto* m = find(id);
  if (m == nullptr) throw UnknownModule(std::string(id));
  return *m;
}

std::vector<const ContentModule*> CourseTree::children(std::string_view id) const {
  const auto idx = index_.find(std::string(id));
  if (idx == index_.end()) throw UnknownModule(std::string(id));
  std::vector<const ContentModule*> out;
  for (std::size_t c : children_[idx->second]) out.push_back(&modules_[c]);
  return out;
}

std::vector<const ContentModule*> CourseTree::lineage(std::string_view id) const {
  const auto idx = index_.find(std::string(id));
  if (idx == index_.end()) throw UnknownModule(std::string(id));
  std::vector<const ContentModule*> out;
  std::optional<std::size_t> cur = idx->second;
  while (cur) {
    out.push_back(&modules_[*cur]);
    cur = parent_[*cur];
  }
  return out;
}

const ContentModule* CourseTree::ancestor_at(std::string_view id, Level level) const {
  for (const auto* m : lineage(id)) {
    if (m->kind == level) return m;
  }
  return nullptr;
}

CourseTree CourseTree::with_week_overrides(WeekOverrides overrides) const {
  for (const auto& [chapter, week] : overrides) {
    const auto* m = find(chapter);
    if (m == nullptr || m->kind != Level::kChapter) {
      throw StructuralError(chapter, "week override does not name a chapter");
    }
    if (week < 0) throw StructuralError(chapter, "week override must be >= 0");
  }
  CourseTree copy = *this;
  copy.week_overrides_ = std::move(overrides);
  return copy;
}

std::string serialize_course_tree(const CourseTree& tree) {
  json modules = json::array();
  for (const auto& m : tree.modules()) {
    json entry = {{"id", m.id},
                  {"kind", to_string(m.kind)},
                  {"block_type", to_string(m.block_type)},
                  {"display_name", m.display_name},
                  {"ordinal", m.ordinal}};
    entry["parent_id"] = m.parent_id ? json(*m.parent_id) : json(nullptr);
    modules.push_back(std::move(entry));
  }
  json doc = {{"course_id", tree.course_id()}, {"title", tree.title()}, {"modules", modules}};
  return doc.dump(1) + "\n";
}

std::vector<std::string> linearize(const CourseTree& tree) { return tree.leaves(); }

int week_of(const CourseTree& tree, std::string_view module_id) {
  const auto* chapter = tree.ancestor_at(module_id, Level::kChapter);
  if (chapter == nullptr) throw NoWeek(std::string(module_id));
  if (auto it = tree.week_overrides().find(chapter->id); it != tree.week_overrides().end()) {
    return it->second;
  }
  return chapter->ordinal + 1;
}

std::optional<std::string> resolve_event_ref(const CourseTree& tree, std::string_view ref) {
  if (ref.empty()) return std::nullopt;
  if (tree.find(ref) != nullptr) return std::string(ref);

  std::string_view key = ref;
  if (auto cut = key.find_first_of("?#"); cut != std::string_view::npos) key = key.substr(0, cut);
  while (!key.empty() && key.back() == '/') key.remove_suffix(1);
  if (auto sep = key.find_last_of("@/"); sep != std::string_view::npos) {
    key = key.substr(sep + 1);
  }
  if (key.empty()) return std::nullopt;
  auto it = tree.suffixes_.find(std::string(key));
  if (it == tree.suffixes_.end() || it->second == CourseTree::kAmbiguous) return std::nullopt;
  return tree.modules_[it->second].id;
}

WeekOverrides parse_week_overrides(std::string_view csv_text) {
  auto rows = csv::parse(csv_text);
  csv::drop_header(rows, "chapter_id");
  WeekOverrides out;
  for (const auto& row : rows) {
    if (row.fields.size() != 2) {
      throw MalformedDocument("week override line " + std::to_string(row.line_no) +
                              ": expected chapter_id,week");
    }
    const auto week = parse_int(row.fields[1]);
    if (!week) {
      throw MalformedDocument("week override line " + std::to_string(row.line_no) +
                              ": week is not an integer");
    }
    const std::string chapter(trim(row.fields[0]));
    if (!out.emplace(chapter, static_cast<int>(*week)).second) {
      throw MalformedDocument("week override line " + std::to_string(row.line_no) +
                              ": duplicate chapter " + chapter);
    }
  }
  return out;
}

}  // namespace loscope
