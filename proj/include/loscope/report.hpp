#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "loscope/analytics.hpp"
#include "loscope/taxonomy.hpp"

namespace loscope::report {

// Everything analyze computes; tables are derived from this and nothing else.
struct Results {
  LoDwellSummary dwell;
  std::vector<LoGradeBoxes> boxes;  // one per requested segment
  std::optional<CorrelationResult> correlation;
  std::string correlation_error;    // set when the correlation is undefined
  BloomDistribution bloom;
  BipartiteMap bipartite;
  CoverageReport coverage;
  nlohmann::json diagnostics = nlohmann::json::object();
};

// A CSV table held as text cells, exactly as written to disk.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(std::string_view name) const;  // throws Error when absent
  const std::string& at(std::size_t row, std::string_view name) const { return rows[row][col(name)]; }
  double number(std::size_t row, std::string_view name) const;
};

struct Tables {
  Table lo_dwell;
  Table lo_grades_box;
  Table bloom;
  Table bipartite;
  Table bipartite_groups;
  nlohmann::json correlation = nlohmann::json::object();
  nlohmann::json coverage = nlohmann::json::object();
  nlohmann::json diagnostics = nlohmann::json::object();
};

struct TableFiles {
  static constexpr const char* kLoDwell = "lo_dwell.csv";
  static constexpr const char* kLoGradesBox = "lo_grades_box.csv";
  static constexpr const char* kBloom = "bloom.csv";
  static constexpr const char* kBipartite = "bipartite.csv";
  static constexpr const char* kBipartiteGroups = "bipartite_groups.csv";
  static constexpr const char* kCorrelation = "correlation.json";
  static constexpr const char* kCoverage = "coverage.json";
  static constexpr const char* kDiagnostics = "diagnostics.json";
  static constexpr const char* kManifest = "manifest.json";
  static constexpr const char* kHtml = "index.html";
  static constexpr const char* kDwellSvg = "charts/dwell_bar.svg";
  static constexpr const char* kGradeBoxSvg = "charts/grade_box.svg";
  static constexpr const char* kBipartiteSvg = "charts/bipartite.svg";
  static constexpr const char* kBloomSvg = "charts/bloom_stack.svg";
};

Tables build_tables(const Results& results);

// file name -> contents (CSV with CRLF rows, JSON with sorted keys).
std::vector<std::pair<std::string, std::string>> serialize_tables(const Tables& tables);

// Inverse of serialize_tables over a directory. Throws IoError naming the first missing file.
Tables read_tables(const std::filesystem::path& dir);

// Writes the tables and returns their (relative path, sha256) entries.
std::vector<std::pair<std::string, std::string>> emit_tables(const Results& results,
                                                             const std::filesystem::path& out_dir);

// Static SVG 1.1 documents without the XML declaration. Pure functions of the tables.
std::string render_dwell_bar(const Table& lo_dwell);
std::string render_grade_box(const Table& lo_grades_box, const Table& lo_dwell);
std::string render_bipartite(const Table& bipartite, const Table& groups, const Table& lo_dwell);
std::string render_bloom_stack(const Table& bloom);

struct Charts {
  std::string dwell_bar, grade_box, bipartite, bloom_stack;
};

Charts render_charts(const Tables& tables);
std::string build_html(const Tables& tables, const Charts& charts);

// Renders charts and index.html into out_dir and returns their manifest entries.
std::vector<std::pair<std::string, std::string>> emit_report(const Tables& tables,
                                                             const std::filesystem::path& out_dir);

// manifest.json over every regular file under out_dir except the manifest
// itself: a JSON list of {path, sha256} sorted by path.
std::string write_manifest(const std::filesystem::path& out_dir);

inline constexpr int kCanvasWidth = 1200;

}  // namespace loscope::report
