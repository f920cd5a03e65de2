#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by the file formats.
namespace fpgnn::text {

std::string_view trim(std::string_view s) noexcept;
bool is_blank(std::string_view s) noexcept;
std::vector<std::string_view> split(std::string_view s, char sep);

/// Throws DataError naming `context` when `s` is not a complete number.
double parse_double(std::string_view s, std::string_view context);
long long parse_int(std::string_view s, std::string_view context);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// Writes `content` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

} // namespace fpgnn::text
