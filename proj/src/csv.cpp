#include "loscope/csv.hpp"

#include "loscope/error.hpp"

namespace loscope::csv {

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row current;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = current.fields.size() == 1 && current.fields[0].empty();
    if (!blank) {
      current.line_no = record_line;
      rows.push_back(std::move(current));
    }
    current = Row{};
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field.push_back(c);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        field.push_back(c);
        break;
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) {
    throw MalformedDocument("unterminated quoted field starting on line " +
                            std::to_string(record_line));
  }
  if (field_started || !field.empty() || !current.fields.empty()) end_record();
  return rows;
}

void drop_header(std::vector<Row>& rows, std::string_view first_column) {
  if (!rows.empty() && !rows.front().fields.empty() &&
      rows.front().fields.front() == first_column) {
    rows.erase(rows.begin());
  }
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

Writer::Writer(std::vector<std::string> header) : width_(header.size()) { append(header); }

Writer& Writer::row(const std::vector<std::string>& fields) {
  if (fields.size() != width_) {
    throw Error("csv row has " + std::to_string(fields.size()) + " fields, expected " +
                std::to_string(width_));
  }
  append(fields);
  return *this;
}

void Writer::append(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_.push_back(',');
    out_ += escape(fields[i]);
  }
  out_ += "\r\n";
}

}  // namespace loscope::csv
