#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace loscope::io {

// Whole-file read. Paths ending in ".gz" are inflated transparently.
// Throws IoError naming the path.
std::string read_file(const std::filesystem::path& path);

// Creates parent directories as needed. Throws IoError naming the path.
void write_file(const std::filesystem::path& path, std::string_view contents);

// Expands a path, a directory (every regular file inside, sorted), or a
// pattern with '*'/'?'/'[...]' wildcards. Results are sorted and unique.
std::vector<std::filesystem::path> expand_inputs(const std::string& pattern);

std::string sha256_hex(std::string_view bytes);

}  // namespace loscope::io
