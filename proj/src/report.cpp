#include "loscope/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

#include "loscope/csv.hpp"
#include "loscope/error.hpp"
#include "loscope/io.hpp"
#include "loscope/text.hpp"

namespace loscope::report {
namespace {

constexpr std::array<const char*, 6> kGroupPalette = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                                      "#d62728", "#9467bd", "#8c564b"};
// Light to dark so higher-order levels read as heavier.
constexpr std::array<const char*, 6> kBloomPalette = {"#fde725", "#7ad151", "#22a884",
                                                      "#2a788e", "#414487", "#440154"};
constexpr std::array<const char*, 6> kBloomInk = {"#000000", "#000000", "#000000",
                                                  "#ffffff", "#ffffff", "#ffffff"};

constexpr const char* kFontStack = "Helvetica, Arial, sans-serif";
constexpr std::size_t kMaxLabelChars = 34;

nlohmann::json num6(double v) { return *parse_double(fixed6(v)); }

std::string f2(double v) { return fixed(v, 2); }

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

// Truncates on code point boundaries.
std::pair<std::string, bool> truncate_label(const std::string& s, std::size_t max_chars) {
  std::size_t chars = 0, i = 0;
  for (; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) continue;
    if (chars == max_chars - 1) break;
    ++chars;
  }
  std::size_t total = 0;
  for (unsigned char c : s) total += (c & 0xC0) != 0x80;
  if (total <= max_chars) return {s, false};
  return {s.substr(0, i) + "…", true};
}

class Svg {
 public:
  Svg(double height, std::string_view title) : height_(height) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kCanvasWidth
         << "\" height=\"" << f2(height) << "\" viewBox=\"0 0 " << kCanvasWidth << ' ' << f2(height)
         << "\" font-family=\"" << kFontStack << "\" font-size=\"12\">\n";
    out_ << "<title>" << xml_escape(title) << "</title>\n";
    out_ << "<rect x=\"0\" y=\"0\" width=\"" << kCanvasWidth << "\" height=\"" << f2(height)
         << "\" fill=\"#ffffff\"/>\n";
    text(kCanvasWidth / 2.0, 28, title, "heading", "middle", "font-size=\"16\" font-weight=\"bold\"");
  }

  void raw(std::string_view s) { out_ << s; }

  void text(double x, double y, std::string_view content, std::string_view cls,
            std::string_view anchor = "start", std::string_view extra = "") {
    out_ << "<text class=\"" << cls << "\" x=\"" << f2(x) << "\" y=\"" << f2(y) << "\"";
    if (anchor != "start") out_ << " text-anchor=\"" << anchor << "\"";
    if (!extra.empty()) out_ << ' ' << extra;
    out_ << '>' << xml_escape(content) << "</text>\n";
  }

  // Long labels are cut with an ellipsis; the full text goes in a <title>.
  void label(double x, double y, const std::string& content, std::string_view anchor = "start") {
    const auto [shown, cut] = truncate_label(content, kMaxLabelChars);
    out_ << "<text class=\"label\" x=\"" << f2(x) << "\" y=\"" << f2(y) << "\"";
    if (anchor != "start") out_ << " text-anchor=\"" << anchor << "\"";
    out_ << '>';
    if (cut) out_ << "<title>" << xml_escape(content) << "</title>";
    out_ << xml_escape(shown) << "</text>\n";
  }

  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width,
            std::string_view extra = "") {
    out_ << "<line x1=\"" << f2(x1) << "\" y1=\"" << f2(y1) << "\" x2=\"" << f2(x2) << "\" y2=\""
         << f2(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << fixed(width, 3) << "\"";
    if (!extra.empty()) out_ << ' ' << extra;
    out_ << "/>\n";
  }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

  double height() const { return height_; }

 private:
  double height_;
  std::ostringstream out_;
};

std::string no_data_svg(std::string_view title) {
  Svg svg(120, title);
  svg.text(kCanvasWidth / 2.0, 80, "No data", "gap", "middle", "fill=\"#777777\"");
  return svg.finish();
}

// Groups in ascending order, each mapped to a palette slot.
std::map<std::string, std::string> group_colors(const Table& lo_dwell) {
  std::set<std::string> groups;
  for (std::size_t i = 0; i < lo_dwell.rows.size(); ++i) groups.insert(lo_dwell.at(i, "lo_group"));
  std::map<std::string, std::string> out;
  std::size_t k = 0;
  for (const auto& g : groups) out[g] = kGroupPalette[k++ % kGroupPalette.size()];
  return out;
}

void group_legend(Svg& svg, const std::map<std::string, std::string>& colors, double y) {
  double x = 200;
  for (const auto& [group, color] : colors) {
    svg.raw("<rect x=\"" + f2(x) + "\" y=\"" + f2(y - 10) + "\" width=\"12\" height=\"12\" fill=\"" +
            color + "\"/>\n");
    svg.label(x + 16, y, group);
    x += 24 + 8.0 * static_cast<double>(std::min(group.size(), kMaxLabelChars)) + 12;
  }
}

void percent_axis(Svg& svg, double left, double plot_w, double y_top, double y_bottom,
                  double domain) {
  for (int k = 0; k <= 4; ++k) {
    const double v = domain * k / 4.0;
    const double x = left + plot_w * k / 4.0;
    svg.line(x, y_top, x, y_bottom, "#dddddd", 1);
    svg.text(x, y_bottom + 16, fixed(v * 100, 0) + "%", "tick", "middle");
  }
}

Table parse_table(std::string_view text) {
  auto rows = csv::parse(text);
  Table t;
  if (rows.empty()) return t;
  t.header = std::move(rows.front().fields);
  for (std::size_t i = 1; i < rows.size(); ++i) t.rows.push_back(std::move(rows[i].fields));
  return t;
}

std::string table_csv(const Table& t) {
  csv::Writer w(t.header);
  for (const auto& r : t.rows) w.row(r);
  return w.str();
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::pair<std::string, std::string> write_entry(const std::filesystem::path& dir,
                                                const std::string& rel, const std::string& body) {
  io::write_file(dir / rel, body);
  return {rel, io::sha256_hex(body)};
}

}  // namespace

std::size_t Table::col(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error("table has no column " + std::string(name));
}

double Table::number(std::size_t row, std::string_view name) const {
  const auto& cell = at(row, name);
  const auto v = parse_double(cell);
  if (!v) throw MalformedDocument("non-numeric cell in column " + std::string(name) + ": " + cell);
  return *v;
}

Tables build_tables(const Results& results) {
  Tables t;

  t.lo_dwell.header = {"lo_code", "lo_group", "engaged_n", "total_s",
                       "total_min", "mean_s", "mean_min", "median_s"};
  for (const auto& r : results.dwell.rows) {
    t.lo_dwell.rows.push_back({r.lo_code, r.lo_group, std::to_string(r.engaged_n), fixed6(r.total_s),
                               fixed6(r.total_min()), fixed6(r.mean_s), fixed6(r.mean_min()),
                               fixed6(r.median_s)});
  }

  t.lo_grades_box.header = {"segment", "lo_code", "lo_group", "n", "min", "q1", "median",
                            "q3", "max", "lower_whisker", "upper_whisker", "outliers"};
  nlohmann::json omitted = nlohmann::json::object();
  for (const auto& seg : results.boxes) {
    const std::string name(to_string(seg.segment));
    omitted[name] = seg.omitted;
    for (const auto& b : seg.boxes) {
      std::string outliers;
      for (double o : b.box.outliers) {
        if (!outliers.empty()) outliers += ';';
        outliers += fixed6(o);
      }
      t.lo_grades_box.rows.push_back(
          {name, b.lo_code, b.lo_group, std::to_string(b.box.n), fixed6(b.box.min), fixed6(b.box.q1),
           fixed6(b.box.median), fixed6(b.box.q3), fixed6(b.box.max), fixed6(b.box.lower_whisker),
           fixed6(b.box.upper_whisker), outliers});
    }
  }

  t.bloom.header = {"week", "level", "level_name", "count", "pct"};
  for (const auto& c : results.bloom.cells) {
    t.bloom.rows.push_back({std::to_string(c.week), std::to_string(static_cast<int>(c.level)),
                            std::string(to_string(c.level)), std::to_string(c.count), fixed6(c.pct)});
  }

  t.bipartite.header = {"group_id", "lo_code", "weight"};
  for (const auto& e : results.bipartite.edges) {
    t.bipartite.rows.push_back({e.group_id, e.lo_code, std::to_string(e.weight)});
  }
  t.bipartite_groups.header = {"group_id", "label", "ordinal", "week", "activities"};
  for (const auto& g : results.bipartite.groups) {
    t.bipartite_groups.rows.push_back({g.group_id, g.label, std::to_string(g.ordinal),
                                       std::to_string(g.week), std::to_string(g.activities)});
  }

  auto& corr = t.correlation;
  if (results.correlation) {
    const auto& c = *results.correlation;
    corr["status"] = "ok";
    corr["n"] = c.n;
    corr["r"] = num6(c.r);
    corr["p"] = num6(c.p);
    // Full-precision copies; the six-decimal fields are for display.
    corr["r_exact"] = c.r;
    corr["p_exact"] = c.p;
    corr["excluded_missing_grade"] = c.excluded_missing_grade;
    corr["excluded_missing_dwell"] = c.excluded_missing_dwell;
    corr["spearman"] = c.spearman ? num6(*c.spearman) : nlohmann::json(nullptr);
  } else {
    corr["status"] = "undefined";
    corr["reason"] = results.correlation_error;
  }

  const auto& cov = results.coverage;
  t.coverage["untagged_leaves"] = cov.untagged_leaves;
  t.coverage["los_without_tags"] = cov.los_without_tags;
  t.coverage["los_without_assessment"] = cov.los_without_assessment;
  t.coverage["tag_histogram"] = cov.tag_histogram;
  t.coverage["clean"] = cov.clean();

  t.diagnostics = results.diagnostics;
  t.diagnostics["untagged_dwell_s"] = num6(static_cast<double>(results.dwell.untagged_ms) / 1000.0);
  t.diagnostics["box_omitted"] = omitted;
  t.diagnostics["bloom_untagged_weeks"] = results.bloom.untagged_weeks;
  t.diagnostics["bloom_unplaced"] = results.bloom.unplaced;
  return t;
}

std::vector<std::pair<std::string, std::string>> serialize_tables(const Tables& t) {
  return {
      {TableFiles::kLoDwell, table_csv(t.lo_dwell)},
      {TableFiles::kLoGradesBox, table_csv(t.lo_grades_box)},
      {TableFiles::kBloom, table_csv(t.bloom)},
      {TableFiles::kBipartite, table_csv(t.bipartite)},
      {TableFiles::kBipartiteGroups, table_csv(t.bipartite_groups)},
      {TableFiles::kCorrelation, dump(t.correlation)},
      {TableFiles::kCoverage, dump(t.coverage)},
      {TableFiles::kDiagnostics, dump(t.diagnostics)},
  };
}

Tables read_tables(const std::filesystem::path& dir) {
  auto json_file = [&](const char* name) {
    const auto path = dir / name;
    const auto body = io::read_file(path);
    try {
      return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedDocument(path.string() + ": " + e.what());
    }
  };
  Tables t;
  t.lo_dwell = parse_table(io::read_file(dir / TableFiles::kLoDwell));
  t.lo_grades_box = parse_table(io::read_file(dir / TableFiles::kLoGradesBox));
  t.bloom = parse_table(io::read_file(dir / TableFiles::kBloom));
  t.bipartite = parse_table(io::read_file(dir / TableFiles::kBipartite));
  t.bipartite_groups = parse_table(io::read_file(dir / TableFiles::kBipartiteGroups));
  t.correlation = json_file(TableFiles::kCorrelation);
  t.coverage = json_file(TableFiles::kCoverage);
  t.diagnostics = json_file(TableFiles::kDiagnostics);
  return t;
}

std::vector<std::pair<std::string, std::string>> emit_tables(const Results& results,
                                                             const std::filesystem::path& out_dir) {
  std::vector<std::pair<std::string, std::string>> manifest;
  for (const auto& [name, body] : serialize_tables(build_tables(results))) {
    manifest.push_back(write_entry(out_dir, name, body));
  }
  return manifest;
}

std::string render_dwell_bar(const Table& lo_dwell) {
  static constexpr const char* kTitle = "Mean engagement per engaged learner by learning objective";
  const std::size_t n = lo_dwell.rows.size();
  if (n == 0) return no_data_svg(kTitle);

  const double left = 200, right = 150, top = 70, row_h = 22, bottom = 60;
  const double plot_w = kCanvasWidth - left - right;
  const double plot_bottom = top + static_cast<double>(n) * row_h;
  Svg svg(plot_bottom + bottom, kTitle);
  const auto colors = group_colors(lo_dwell);
  group_legend(svg, colors, 52);

  double max_v = 0;
  for (std::size_t i = 0; i < n; ++i) max_v = std::max(max_v, lo_dwell.number(i, "mean_min"));

  for (int k = 0; k <= 4; ++k) {
    const double x = left + plot_w * k / 4.0;
    svg.line(x, top, x, plot_bottom, "#dddddd", 1);
    svg.text(x, plot_bottom + 16, fixed(max_v * k / 4.0, 1), "tick", "middle");
  }
  svg.text(left + plot_w / 2, plot_bottom + 40, "minutes", "axis", "middle");

  for (std::size_t i = 0; i < n; ++i) {
    const double y = top + static_cast<double>(i) * row_h;
    const double v = lo_dwell.number(i, "mean_min");
    const double w = max_v > 0 ? v / max_v * plot_w : 0;
    const auto& code = lo_dwell.at(i, "lo_code");
    svg.raw("<g><title>" +
            xml_escape(code + ": mean " + lo_dwell.at(i, "mean_min") + " min, total " +
                       lo_dwell.at(i, "total_min") + " min, median " + lo_dwell.at(i, "median_s") +
                       " s, engaged " + lo_dwell.at(i, "engaged_n")) +
            "</title><rect class=\"bar\" data-lo=\"" + xml_escape(code) + "\" x=\"" + f2(left) +
            "\" y=\"" + f2(y + 3) + "\" width=\"" + fixed(w, 3) + "\" height=\"" + f2(row_h - 6) +
            "\" fill=\"" + colors.at(lo_dwell.at(i, "lo_group")) + "\"/></g>\n");
    svg.label(left - 8, y + row_h / 2 + 4, code, "end");
    svg.text(left + w + 6, y + row_h / 2 + 4, lo_dwell.at(i, "mean_min"), "value");
  }
  svg.line(left, top, left, plot_bottom, "#333333", 1);
  return svg.finish();
}

std::string render_grade_box(const Table& boxes, const Table& lo_dwell) {
  static constexpr const char* kTitle = "Grade distribution by learning objective";
  std::vector<std::string> segments;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  double domain = 1.0;
  for (std::size_t i = 0; i < boxes.rows.size(); ++i) {
    const auto& seg = boxes.at(i, "segment");
    if (std::find(segments.begin(), segments.end(), seg) == segments.end()) segments.push_back(seg);
    index[{seg, boxes.at(i, "lo_code")}] = i;
    domain = std::max(domain, boxes.number(i, "max"));
  }
  const std::size_t n_lo = lo_dwell.rows.size();
  if (n_lo == 0 || segments.empty()) return no_data_svg(kTitle);

  const double left = 200, right = 150, top = 70, sub_h = 20, gap = 8, bottom = 70;
  const double plot_w = kCanvasWidth - left - right;
  const double block_h = sub_h * static_cast<double>(segments.size()) + gap;
  const double plot_bottom = top + block_h * static_cast<double>(n_lo);
  Svg svg(plot_bottom + bottom, kTitle);
  const auto colors = group_colors(lo_dwell);
  group_legend(svg, colors, 52);
  percent_axis(svg, left, plot_w, top, plot_bottom, domain);
  auto x_of = [&](double v) { return left + v / domain * plot_w; };

  bool any_gap = false;
  for (std::size_t l = 0; l < n_lo; ++l) {
    const auto& code = lo_dwell.at(l, "lo_code");
    const auto& color = colors.at(lo_dwell.at(l, "lo_group"));
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const double y = top + block_h * static_cast<double>(l) + sub_h * static_cast<double>(s);
      const double mid = y + sub_h / 2;
      svg.label(left - 8, mid + 4, segments.size() > 1 ? code + " " + segments[s] : code, "end");
      const auto it = index.find({segments[s], code});
      if (it == index.end()) {
        any_gap = true;
        svg.text(left + 6, mid + 4, "no data *", "gap", "start", "fill=\"#777777\"");
        continue;
      }
      const std::size_t r = it->second;
      const double q1 = x_of(boxes.number(r, "q1")), q3 = x_of(boxes.number(r, "q3"));
      const double med = x_of(boxes.number(r, "median"));
      const double lw = x_of(boxes.number(r, "lower_whisker"));
      const double uw = x_of(boxes.number(r, "upper_whisker"));
      svg.raw("<g class=\"box\" data-lo=\"" + xml_escape(code) + "\" data-segment=\"" +
              xml_escape(segments[s]) + "\"><title>" +
              xml_escape(code + " (" + segments[s] + "): n " + boxes.at(r, "n") + ", q1 " +
                         boxes.at(r, "q1") + ", median " + boxes.at(r, "median") + ", q3 " +
                         boxes.at(r, "q3") + ", whiskers " + boxes.at(r, "lower_whisker") + " to " +
                         boxes.at(r, "upper_whisker")) +
              "</title>\n");
      svg.line(lw, mid, q1, mid, "#333333", 1);
      svg.line(q3, mid, uw, mid, "#333333", 1);
      svg.line(lw, mid - 4, lw, mid + 4, "#333333", 1);
      svg.line(uw, mid - 4, uw, mid + 4, "#333333", 1);
      svg.raw("<rect x=\"" + f2(q1) + "\" y=\"" + f2(y + 4) + "\" width=\"" + f2(q3 - q1) +
              "\" height=\"" + f2(sub_h - 8) + "\" fill=\"" + color +
              "\" fill-opacity=\"0.6\" stroke=\"#333333\" stroke-width=\"1\"/>\n");
      svg.line(med, y + 3, med, y + sub_h - 3, "#000000", 2);
      const auto& outliers = boxes.at(r, "outliers");
      if (!outliers.empty()) {
        for (const auto& o : split(outliers, ';')) {
          const auto v = parse_double(o);
          if (!v) continue;
          svg.raw("<circle cx=\"" + f2(x_of(*v)) + "\" cy=\"" + f2(mid) +
                  "\" r=\"2.5\" fill=\"none\" stroke=\"#333333\"/>\n");
        }
      }
      svg.raw("</g>\n");
      svg.text(kCanvasWidth - right + 8, mid + 4, boxes.at(r, "median"), "value");
    }
  }
  svg.text(left + plot_w / 2, plot_bottom + 36, "share of possible points", "axis", "middle");
  if (any_gap) {
    svg.text(left, plot_bottom + 58, "* No graded data for this objective in this segment.", "note");
  }
  return svg.finish();
}

std::string render_bipartite(const Table& edges, const Table& groups, const Table& lo_dwell) {
  static constexpr const char* kTitle = "Course sections linked to learning objectives";
  const std::size_t ng = groups.rows.size(), nl = lo_dwell.rows.size();
  if (ng == 0 || nl == 0) return no_data_svg(kTitle);

  const double top = 70, slot = 26, bottom = 40;
  const double gx = 360, lx = 840, max_r = 12, max_stroke = 8;
  const double rows = static_cast<double>(std::max(ng, nl));
  Svg svg(top + rows * slot + bottom, kTitle);
  const auto colors = group_colors(lo_dwell);

  std::map<std::string, double> gy, ly;
  std::map<std::string, std::string> lo_color, group_label;
  double max_act = 0;
  for (std::size_t i = 0; i < ng; ++i) {
    max_act = std::max(max_act, groups.number(i, "activities"));
    // Centre the shorter column against the taller one.
    gy[groups.at(i, "group_id")] =
        top + (rows - static_cast<double>(ng)) * slot / 2 + (static_cast<double>(i) + 0.5) * slot;
    group_label[groups.at(i, "group_id")] = groups.at(i, "label");
  }
  for (std::size_t i = 0; i < nl; ++i) {
    ly[lo_dwell.at(i, "lo_code")] =
        top + (rows - static_cast<double>(nl)) * slot / 2 + (static_cast<double>(i) + 0.5) * slot;
    lo_color[lo_dwell.at(i, "lo_code")] = colors.at(lo_dwell.at(i, "lo_group"));
  }

  double max_w = 0;
  for (std::size_t i = 0; i < edges.rows.size(); ++i) max_w = std::max(max_w, edges.number(i, "weight"));
  for (std::size_t i = 0; i < edges.rows.size(); ++i) {
    const auto& g = edges.at(i, "group_id");
    const auto& lo = edges.at(i, "lo_code");
    if (!gy.count(g) || !ly.count(lo)) continue;
    const double w = edges.number(i, "weight");
    svg.raw("<g><title>" + xml_escape(group_label[g] + " to " + lo + ": " + edges.at(i, "weight")) +
            "</title>");
    svg.line(gx, gy[g], lx, ly[lo], lo_color[lo], max_w > 0 ? w / max_w * max_stroke : 0,
             "class=\"edge\" data-weight=\"" + edges.at(i, "weight") + "\" stroke-opacity=\"0.45\"");
    svg.raw("</g>\n");
  }

  for (std::size_t i = 0; i < ng; ++i) {
    const auto& id = groups.at(i, "group_id");
    const double a = groups.number(i, "activities");
    const double r = max_act > 0 ? max_r * std::sqrt(a / max_act) : 0;
    svg.raw("<circle class=\"group\" cx=\"" + f2(gx) + "\" cy=\"" + f2(gy[id]) + "\" r=\"" +
            fixed(r, 3) + "\" fill=\"#555555\"/>\n");
    svg.label(40, gy[id] + 4, groups.at(i, "label"));
    svg.text(gx - max_r - 8, gy[id] + 4, groups.at(i, "activities"), "value", "end");
  }
  for (std::size_t i = 0; i < nl; ++i) {
    const auto& code = lo_dwell.at(i, "lo_code");
    svg.raw("<circle class=\"lo\" cx=\"" + f2(lx) + "\" cy=\"" + f2(ly[code]) + "\" r=\"6\" fill=\"" +
            lo_color[code] + "\"/>\n");
    svg.label(lx + 14, ly[code] + 4, code);
  }
  return svg.finish();
}

std::string render_bloom_stack(const Table& bloom) {
  static constexpr const char* kTitle = "Cognitive level of tagged activities by week";
  // week -> level -> row
  std::map<int, std::array<std::optional<std::size_t>, 6>> weeks;
  for (std::size_t i = 0; i < bloom.rows.size(); ++i) {
    const auto week = parse_int(bloom.at(i, "week"));
    const auto level = parse_int(bloom.at(i, "level"));
    if (!week || !level || *level < 1 || *level > 6) {
      throw MalformedDocument("bad bloom row " + std::to_string(i + 2));
    }
    weeks[static_cast<int>(*week)][static_cast<std::size_t>(*level - 1)] = i;
  }
  if (weeks.empty()) return no_data_svg(kTitle);

  std::vector<int> order;
  for (const auto& [w, _] : weeks) {
    if (w > 0) order.push_back(w);
  }
  const bool supplemental = weeks.count(0) > 0;
  const double gap_slots = supplemental && !order.empty() ? 1 : 0;
  if (supplemental) order.push_back(0);

  const double left = 80, right = 220, top = 70, plot_h = 480, bottom = 70;
  const double plot_w = kCanvasWidth - left - right;
  const double slot_w = plot_w / (static_cast<double>(order.size()) + gap_slots);
  const double col_w = std::min(70.0, slot_w * 0.6);
  const double base = top + plot_h;
  Svg svg(base + bottom, kTitle);

  for (int k = 0; k <= 4; ++k) {
    const double y = base - plot_h * k / 4.0;
    svg.line(left, y, left + plot_w, y, "#dddddd", 1);
    svg.text(left - 8, y + 4, std::to_string(25 * k) + "%", "tick", "end");
  }

  for (std::size_t j = 0; j < order.size(); ++j) {
    const int week = order[j];
    const double slot = static_cast<double>(j) + (week == 0 ? gap_slots : 0);
    const double cx = left + (slot + 0.5) * slot_w;
    const double x = cx - col_w / 2;
    svg.text(cx, base + 18, week == 0 ? "Supplemental" : "Week " + std::to_string(week), "axis",
             "middle");
    std::size_t total = 0;
    double y = base;
    for (std::size_t l = 0; l < 6; ++l) {
      const auto& row = weeks[week][l];
      if (!row) continue;
      total += static_cast<std::size_t>(bloom.number(*row, "count"));
      const double h = bloom.number(*row, "pct") * plot_h;
      if (h <= 0) continue;
      y -= h;
      svg.raw("<g><title>" +
              xml_escape(bloom.at(*row, "level_name") + ": " + bloom.at(*row, "count") +
                         " activities, " + bloom.at(*row, "pct")) +
              "</title><rect class=\"segment\" data-week=\"" + std::to_string(week) +
              "\" data-level=\"" + std::to_string(l + 1) + "\" x=\"" + f2(x) + "\" y=\"" +
              fixed(y, 3) + "\" width=\"" + f2(col_w) + "\" height=\"" + fixed(h, 3) + "\" fill=\"" +
              kBloomPalette[l] + "\"/></g>\n");
      if (h >= 14) {
        svg.text(cx, y + h / 2 + 4, bloom.at(*row, "pct"), "value", "middle",
                 std::string("font-size=\"10\" fill=\"") + kBloomInk[l] + "\"");
      }
    }
    if (total == 0) svg.text(cx, base - 8, "no tags", "gap", "middle", "fill=\"#777777\"");
  }

  const double lx = kCanvasWidth - right + 30;
  for (std::size_t l = 0; l < 6; ++l) {
    const double y = top + 10 + 22.0 * static_cast<double>(l);
    svg.raw("<rect x=\"" + f2(lx) + "\" y=\"" + f2(y - 11) + "\" width=\"14\" height=\"14\" fill=\"" +
            kBloomPalette[l] + "\"/>\n");
    svg.label(lx + 20, y, std::to_string(l + 1) + " " +
                              std::string(to_string(static_cast<Bloom>(l + 1))));
  }
  return svg.finish();
}

Charts render_charts(const Tables& t) {
  return Charts{render_dwell_bar(t.lo_dwell), render_grade_box(t.lo_grades_box, t.lo_dwell),
                render_bipartite(t.bipartite, t.bipartite_groups, t.lo_dwell),
                render_bloom_stack(t.bloom)};
}

namespace {

std::string json_text(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return "n/a";
  const auto& v = j[key];
  if (v.is_number_float()) return fixed6(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void id_list(std::ostringstream& out, const nlohmann::json& cov, const char* key,
             std::string_view heading) {
  const auto& list = cov.contains(key) ? cov[key] : nlohmann::json::array();
  out << "<h3>" << xml_escape(heading) << " (" << list.size() << ")</h3>\n";
  if (list.empty()) {
    out << "<p class=\"no-data\">None.</p>\n";
    return;
  }
  out << "<ul>\n";
  for (const auto& id : list) out << "<li><code>" << xml_escape(id.get<std::string>()) << "</code></li>\n";
  out << "</ul>\n";
}

void figure(std::ostringstream& out, bool has_data, const std::string& svg) {
  if (!has_data) {
    out << "<p class=\"no-data\">No data.</p>\n";
    return;
  }
  out << "<figure>\n" << svg << "</figure>\n";
}

}  // namespace

std::string build_html(const Tables& t, const Charts& charts) {
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
      << "<title>Learning objective analytics</title>\n<style>\n"
      << "body{font-family:" << kFontStack << ";max-width:1240px;margin:2em auto;color:#222}\n"
      << "table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:4px 10px;text-align:left}\n"
      << "figure{margin:0;overflow-x:auto}.no-data{color:#777;font-style:italic}\n"
      << "</style>\n</head>\n<body>\n<h1>Learning objective analytics</h1>\n";

  const auto& c = t.correlation;
  const auto& d = t.diagnostics;
  out << "<section id=\"summary\">\n<h2>Summary</h2>\n<table>\n";
  auto row = [&](std::string_view k, const std::string& v) {
    out << "<tr><th>" << xml_escape(k) << "</th><td>" << xml_escape(v) << "</td></tr>\n";
  };
  if (c.value("status", "") == "ok") {
    row("Pearson r (engagement vs final grade)", json_text(c, "r"));
    row("p (two-tailed)", json_text(c, "p"));
    row("Learners in correlation", json_text(c, "n"));
    if (c.contains("spearman") && !c["spearman"].is_null()) row("Spearman rho", json_text(c, "spearman"));
  } else {
    row("Correlation", "undefined: " + json_text(c, "reason"));
  }
  if (d.contains("ingest")) {
    row("Learners with events", json_text(d["ingest"], "learners"));
    row("Event records", json_text(d["ingest"], "records"));
  }
  if (d.contains("findings")) row("Validation findings", std::to_string(d["findings"].size()));
  row("Learning objectives", std::to_string(t.lo_dwell.rows.size()));
  out << "</table>\n</section>\n";

  out << "<section id=\"engagement\">\n<h2>Engagement</h2>\n";
  figure(out, !t.lo_dwell.rows.empty(), charts.dwell_bar);
  out << "</section>\n<section id=\"performance\">\n<h2>Performance</h2>\n";
  figure(out, !t.lo_grades_box.rows.empty(), charts.grade_box);
  out << "</section>\n<section id=\"alignment\">\n<h2>Alignment</h2>\n";
  figure(out, !t.bipartite.rows.empty(), charts.bipartite);
  out << "</section>\n<section id=\"cognitive-load\">\n<h2>Cognitive Load</h2>\n";
  figure(out, !t.bloom.rows.empty(), charts.bloom_stack);
  out << "</section>\n<section id=\"coverage\">\n<h2>Coverage</h2>\n";
  id_list(out, t.coverage, "untagged_leaves", "Activities without a learning objective");
  id_list(out, t.coverage, "los_without_tags", "Objectives never tagged");
  id_list(out, t.coverage, "los_without_assessment", "Objectives without a graded activity");
  out << "</section>\n</body>\n</html>\n";
  return out.str();
}

std::vector<std::pair<std::string, std::string>> emit_report(const Tables& tables,
                                                             const std::filesystem::path& out_dir) {
  const auto charts = render_charts(tables);
  static constexpr const char* kDecl = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  return {
      write_entry(out_dir, TableFiles::kDwellSvg, kDecl + charts.dwell_bar),
      write_entry(out_dir, TableFiles::kGradeBoxSvg, kDecl + charts.grade_box),
      write_entry(out_dir, TableFiles::kBipartiteSvg, kDecl + charts.bipartite),
      write_entry(out_dir, TableFiles::kBloomSvg, kDecl + charts.bloom_stack),
      write_entry(out_dir, TableFiles::kHtml, build_html(tables, charts)),
  };
}

std::string write_manifest(const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::vector<std::pair<std::string, std::string>> entries;
  std::error_code ec;
  for (fs::recursive_directory_iterator it(out_dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    const auto rel = fs::relative(it->path(), out_dir).generic_string();
    if (rel == TableFiles::kManifest) continue;
    entries.emplace_back(rel, io::sha256_hex(io::read_file(it->path())));
  }
  if (ec) throw IoError(out_dir.string(), "cannot list output directory");
  std::sort(entries.begin(), entries.end());
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [path, sha] : entries) list.push_back({{"path", path}, {"sha256", sha}});
  const auto body = dump(list);
  io::write_file(out_dir / TableFiles::kManifest, body);
  return body;
}

}  // namespace loscope::report
