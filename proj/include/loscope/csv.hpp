#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace loscope::csv {

struct Row {
  std::size_t line_no = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// RFC 4180 reader. Accepts LF or CRLF line endings; blank lines are skipped.
// Throws MalformedDocument on an unterminated quoted field.
std::vector<Row> parse(std::string_view text);

// Drops rows[0] when its first field equals `first_column` (case-sensitive).
void drop_header(std::vector<Row>& rows, std::string_view first_column);

std::string escape(std::string_view field);

class Writer {
 public:
  explicit Writer(std::vector<std::string> header);

  Writer& row(const std::vector<std::string>& fields);
  const std::string& str() const noexcept { return out_; }

 private:
  void append(const std::vector<std::string>& fields);

  std::size_t width_;
  std::string out_;
};

}  // namespace loscope::csv
