#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace loscope {

// Fixed six-decimal rendering, round-half-even on exact binary ties.
// Negative zero renders as "0.000000".
std::string fixed6(double value);

// Fixed rendering at an arbitrary number of decimals (used for SVG geometry).
std::string fixed(double value, int decimals);

// Whole-string numeric parses; surrounding ASCII whitespace is tolerated.
std::optional<double> parse_double(std::string_view text);
std::optional<std::int64_t> parse_int(std::string_view text);

std::string_view trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);

}  // namespace loscope
