#include "loscope/report.hpp"

#include <gtest/gtest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <cmath>
#include <functional>
#include <regex>
#include <set>
#include <sstream>

#include "loscope/error.hpp"
#include "loscope/io.hpp"
#include "loscope/text.hpp"

namespace loscope::report {
namespace {

namespace pt = boost::property_tree;

struct Element {
  std::string tag;
  std::map<std::string, std::string> attrs;
  std::string text;
};

std::vector<Element> parse_svg(const std::string& svg) {
  std::istringstream in(svg);
  pt::ptree tree;
  pt::read_xml(in, tree);  // throws on malformed XML
  std::vector<Element> out;
  std::function<void(const std::string&, const pt::ptree&)> walk = [&](const std::string& tag,
                                                                      const pt::ptree& node) {
    Element e{tag, {}, node.data()};
    if (auto a = node.get_child_optional("<xmlattr>")) {
      for (const auto& [k, v] : *a) e.attrs[k] = v.data();
    }
    out.push_back(e);
    for (const auto& [k, child] : node) {
      if (k != "<xmlattr>" && k != "<xmlcomment>") walk(k, child);
    }
  };
  for (const auto& [k, child] : tree) walk(k, child);
  return out;
}

std::vector<Element> with_class(const std::vector<Element>& els, const std::string& cls) {
  std::vector<Element> out;
  for (const auto& e : els) {
    auto it = e.attrs.find("class");
    if (it != e.attrs.end() && it->second == cls) out.push_back(e);
  }
  return out;
}

LoDwell dwell_row(std::string code, double total_s, double mean_s, std::size_t n) {
  LoDwell d;
  d.lo_group = default_lo_group(code);
  d.lo_code = std::move(code);
  d.total_s = total_s;
  d.mean_s = mean_s;
  d.median_s = mean_s * 0.9;
  d.engaged_n = n;
  return d;
}

Results sample_results() {
  Results r;
  r.dwell.rows = {dwell_row("LO1.1", 36000, 1234.5678, 29), dwell_row("LO1.2", 7200, 600, 12),
                  dwell_row("LO2.1", 0, 0, 0), dwell_row("LO3.1", 90000, 3000, 30)};
  r.dwell.untagged_ms = 4500;

  LoGradeBoxes all;
  all.segment = Segment::kAll;
  all.boxes.push_back({"LO1.1", "LO1", stats::box_stats(std::vector<double>{0.2, 0.5, 0.55, 0.6, 1.0})});
  all.boxes.push_back({"LO1.2", "LO1", stats::box_stats(std::vector<double>{0.7, 0.7, 0.7})});
  all.omitted = {"LO2.1", "LO3.1"};
  LoGradeBoxes passed;
  passed.segment = Segment::kPassed;
  passed.boxes.push_back({"LO1.1", "LO1", stats::box_stats(std::vector<double>{0.5, 0.6, 1.0})});
  passed.omitted = {"LO1.2", "LO2.1", "LO3.1"};
  r.boxes = {all, passed};

  r.correlation = CorrelationResult{0.5612345678901, 1.234e-9, 930, 2, 1, std::nullopt};

  const std::array<std::size_t, 6> w1 = {3, 5, 1, 0, 1, 0};
  const std::array<std::size_t, 6> w0 = {0, 1, 1, 0, 0, 0};
  for (auto [week, counts] : {std::pair{1, w1}, std::pair{2, std::array<std::size_t, 6>{}},
                              std::pair{0, w0}}) {
    std::size_t total = 0;
    for (auto c : counts) total += c;
    for (int l = 0; l < 6; ++l) {
      const double pct = total ? static_cast<double>(counts[l]) / static_cast<double>(total) : 0.0;
      r.bloom.cells.push_back({week, static_cast<Bloom>(l + 1), counts[l], pct});
    }
  }
  std::sort(r.bloom.cells.begin(), r.bloom.cells.end(),
            [](const BloomCell& a, const BloomCell& b) {
              return std::pair(a.week, a.level) < std::pair(b.week, b.level);
            });
  r.bloom.untagged_weeks = {2};

  r.bipartite.groups = {
      {"ch1", "Week 1: Foundations", 1, 1, 10},
      {"ch2", "Week 2: A deliberately long chapter title that will not fit", 2, 2, 4},
      {"ch0", "Resources & <extras>", 3, 0, 2}};
  r.bipartite.edges = {{"ch0", "LO3.1", 2}, {"ch1", "LO1.1", 7}, {"ch1", "LO1.2", 3}, {"ch2", "LO3.1", 4}};

  r.coverage.untagged_leaves = {"leafA", "leafB"};
  r.coverage.los_without_tags = {"LO2.1"};
  r.coverage.tag_histogram = {{"LO1.1", 7}, {"LO1.2", 3}, {"LO3.1", 6}};
  r.diagnostics = {{"ingest", {{"learners", 930}, {"records", 1000}}}, {"findings", nlohmann::json::array()}};
  return r;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("loscope_report_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(ReportTablesTest, FormatsAndRoundTrips) {
  const auto tables = build_tables(sample_results());
  ASSERT_EQ(tables.lo_dwell.rows.size(), 4u);
  EXPECT_EQ(tables.lo_dwell.at(0, "mean_s"), "1234.567800");
  EXPECT_EQ(tables.lo_dwell.at(0, "mean_min"), fixed6(1234.5678 / 60));
  EXPECT_EQ(tables.lo_dwell.at(3, "mean_s"), "3000.000000");
  EXPECT_EQ(tables.lo_grades_box.rows.size(), 3u);
  EXPECT_EQ(tables.lo_grades_box.at(0, "outliers"), "0.200000;1.000000");
  EXPECT_EQ(tables.lo_grades_box.at(2, "segment"), "passed");
  EXPECT_EQ(tables.correlation["r"].get<double>(), 0.561235);
  EXPECT_EQ(tables.correlation["r_exact"].get<double>(), 0.5612345678901);
  EXPECT_EQ(tables.correlation["p"].get<double>(), 0.0);
  EXPECT_TRUE(tables.correlation["spearman"].is_null());
  EXPECT_EQ(tables.diagnostics["untagged_dwell_s"].get<double>(), 4.5);
  EXPECT_EQ(tables.diagnostics["box_omitted"]["passed"].size(), 3u);

  const auto dir = temp_dir("roundtrip");
  const auto entries = emit_tables(sample_results(), dir);
  EXPECT_EQ(entries.size(), 8u);
  for (const auto& [rel, sha] : entries) EXPECT_EQ(io::sha256_hex(io::read_file(dir / rel)), sha);
  const auto csv = io::read_file(dir / TableFiles::kLoDwell);
  EXPECT_NE(csv.find("\r\n"), std::string::npos);
  const auto back = read_tables(dir);
  EXPECT_EQ(back.lo_dwell.rows, tables.lo_dwell.rows);
  EXPECT_EQ(back.lo_grades_box.rows, tables.lo_grades_box.rows);
  EXPECT_EQ(back.bipartite_groups.rows, tables.bipartite_groups.rows);
  EXPECT_EQ(back.correlation, tables.correlation);
  EXPECT_EQ(serialize_tables(back), serialize_tables(tables));
  std::filesystem::remove(dir / TableFiles::kBloom);
  EXPECT_THROW(read_tables(dir), IoError);
}

TEST(ReportChartsTest, DeterministicAndPureFunctionOfTables) {
  const auto dir = temp_dir("pure");
  emit_tables(sample_results(), dir);
  const auto a = render_charts(build_tables(sample_results()));
  const auto b = render_charts(read_tables(dir));
  EXPECT_EQ(a.dwell_bar, b.dwell_bar);
  EXPECT_EQ(a.grade_box, b.grade_box);
  EXPECT_EQ(a.bipartite, b.bipartite);
  EXPECT_EQ(a.bloom_stack, b.bloom_stack);
  EXPECT_EQ(build_html(read_tables(dir), b), build_html(build_tables(sample_results()), a));
}

TEST(ReportChartsTest, WellFormedAtFixedWidth) {
  const auto charts = render_charts(build_tables(sample_results()));
  for (const auto* svg : {&charts.dwell_bar, &charts.grade_box, &charts.bipartite, &charts.bloom_stack}) {
    std::vector<Element> els;
    ASSERT_NO_THROW(els = parse_svg(*svg));
    ASSERT_EQ(els.front().tag, "svg");
    EXPECT_EQ(els.front().attrs.at("width"), "1200");
  }
}

TEST(ReportChartsTest, NumericLabelsEqualTableValues) {
  const auto t = build_tables(sample_results());
  const auto charts = render_charts(t);
  const std::regex six(R"(-?\d+\.\d{6})");

  std::set<std::string> allowed;
  for (std::size_t i = 0; i < t.lo_dwell.rows.size(); ++i) allowed.insert(t.lo_dwell.at(i, "mean_min"));
  for (const auto& e : with_class(parse_svg(charts.dwell_bar), "value")) {
    EXPECT_TRUE(std::regex_match(e.text, six)) << e.text;
    EXPECT_TRUE(allowed.count(e.text)) << e.text;
  }
  EXPECT_EQ(with_class(parse_svg(charts.dwell_bar), "value").size(), 4u);

  allowed.clear();
  for (std::size_t i = 0; i < t.lo_grades_box.rows.size(); ++i) allowed.insert(t.lo_grades_box.at(i, "median"));
  const auto box_values = with_class(parse_svg(charts.grade_box), "value");
  EXPECT_EQ(box_values.size(), 3u);
  for (const auto& e : box_values) EXPECT_TRUE(allowed.count(e.text)) << e.text;

  allowed.clear();
  for (std::size_t i = 0; i < t.bloom.rows.size(); ++i) allowed.insert(t.bloom.at(i, "pct"));
  const auto bloom_values = with_class(parse_svg(charts.bloom_stack), "value");
  EXPECT_FALSE(bloom_values.empty());
  for (const auto& e : bloom_values) {
    EXPECT_TRUE(std::regex_match(e.text, six)) << e.text;
    EXPECT_TRUE(allowed.count(e.text)) << e.text;
  }

  allowed.clear();
  for (std::size_t i = 0; i < t.bipartite_groups.rows.size(); ++i) {
    allowed.insert(t.bipartite_groups.at(i, "activities"));
  }
  for (const auto& e : with_class(parse_svg(charts.bipartite), "value")) {
    EXPECT_TRUE(allowed.count(e.text)) << e.text;
  }
}

TEST(ReportChartsTest, BarLengthsProportionalToValues) {
  const auto t = build_tables(sample_results());
  double max_v = 0;
  std::map<std::string, double> value;
  for (std::size_t i = 0; i < t.lo_dwell.rows.size(); ++i) {
    value[t.lo_dwell.at(i, "lo_code")] = *parse_double(t.lo_dwell.at(i, "mean_min"));
    max_v = std::max(max_v, value[t.lo_dwell.at(i, "lo_code")]);
  }
  const auto bars = with_class(parse_svg(render_dwell_bar(t.lo_dwell)), "bar");
  ASSERT_EQ(bars.size(), 4u);
  for (const auto& b : bars) {
    const double want = value.at(b.attrs.at("data-lo")) / max_v * 850.0;
    EXPECT_NEAR(*parse_double(b.attrs.at("width")), want, 0.5) << b.attrs.at("data-lo");
  }

  const auto segments = with_class(parse_svg(render_bloom_stack(t.bloom)), "segment");
  std::map<std::string, double> column;
  for (const auto& s : segments) {
    const auto week = s.attrs.at("data-week");
    const auto level = s.attrs.at("data-level");
    double pct = -1;
    for (std::size_t i = 0; i < t.bloom.rows.size(); ++i) {
      if (t.bloom.at(i, "week") == week && t.bloom.at(i, "level") == level) pct = t.bloom.number(i, "pct");
    }
    EXPECT_NEAR(*parse_double(s.attrs.at("height")), pct * 480.0, 0.5);
    column[week] += *parse_double(s.attrs.at("height"));
  }
  EXPECT_NEAR(column["1"], 480.0, 0.5);
  EXPECT_NEAR(column["0"], 480.0, 0.5);
  EXPECT_EQ(column.count("2"), 0u);  // untagged week draws nothing

  const auto edges = with_class(parse_svg(render_bipartite(t.bipartite, t.bipartite_groups, t.lo_dwell)), "edge");
  ASSERT_EQ(edges.size(), 4u);
  for (const auto& e : edges) {
    EXPECT_NEAR(*parse_double(e.attrs.at("stroke-width")), *parse_double(e.attrs.at("data-weight")) / 7.0 * 8.0,
                1e-3);
  }
}

TEST(ReportChartsTest, LongLabelsTruncatedWithFullTitle) {
  const auto t = build_tables(sample_results());
  const auto svg = render_bipartite(t.bipartite, t.bipartite_groups, t.lo_dwell);
  const std::string full = "Week 2: A deliberately long chapter title that will not fit";
  EXPECT_NE(svg.find("<title>" + full + "</title>"), std::string::npos);
  EXPECT_NE(svg.find("…"), std::string::npos);
  EXPECT_NE(svg.find("Resources &amp; &lt;extras&gt;"), std::string::npos);
}

TEST(ReportChartsTest, EmptyTablesRenderNoData) {
  const auto t = build_tables(Results{});
  const auto charts = render_charts(t);
  for (const auto* svg : {&charts.dwell_bar, &charts.grade_box, &charts.bipartite, &charts.bloom_stack}) {
    EXPECT_NO_THROW(parse_svg(*svg));
    EXPECT_NE(svg->find("No data"), std::string::npos);
  }
  const auto html = build_html(t, charts);
  EXPECT_NE(html.find("class=\"no-data\""), std::string::npos);
  EXPECT_NE(html.find("undefined"), std::string::npos);
}

TEST(ReportHtmlTest, SectionsInOrderAndSelfContained) {
  const auto t = build_tables(sample_results());
  const auto html = build_html(t, render_charts(t));
  std::size_t pos = 0;
  for (const char* h : {"<h2>Summary</h2>", "<h2>Engagement</h2>", "<h2>Performance</h2>",
                        "<h2>Alignment</h2>", "<h2>Cognitive Load</h2>", "<h2>Coverage</h2>"}) {
    const auto at = html.find(h, pos);
    ASSERT_NE(at, std::string::npos) << h;
    pos = at;
  }
  EXPECT_EQ(html.find("<script"), std::string::npos);
  EXPECT_EQ(html.find("http://", html.find("<body>")), html.find("http://www.w3.org/2000/svg"));
  EXPECT_NE(html.find("0.561235"), std::string::npos);
  EXPECT_NE(html.find("<code>leafA</code>"), std::string::npos);
}

TEST(ReportManifestTest, SortedAndByteStable) {
  const auto dir = temp_dir("manifest");
  emit_tables(sample_results(), dir);
  emit_report(read_tables(dir), dir);
  const auto first = write_manifest(dir);
  const auto again = write_manifest(dir);
  EXPECT_EQ(first, again);
  const auto list = nlohmann::json::parse(first);
  ASSERT_EQ(list.size(), 13u);
  for (std::size_t i = 1; i < list.size(); ++i) {
    EXPECT_LT(list[i - 1]["path"].get<std::string>(), list[i]["path"].get<std::string>());
  }
  for (const auto& e : list) {
    EXPECT_EQ(io::sha256_hex(io::read_file(dir / e["path"].get<std::string>())), e["sha256"]);
  }
  const auto svg = io::read_file(dir / TableFiles::kDwellSvg);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NO_THROW(parse_svg(svg));
}

}  // namespace
}  // namespace loscope::report
