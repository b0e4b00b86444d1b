#pragma once

// Line-oriented text helpers shared by every file format.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace kprop::text {

/// Round-trip exact decimal: 17 significant digits.
std::string format_decimal(double v);

std::vector<std::string_view> split_tabs(std::string_view line);
std::vector<std::string_view> split_whitespace(std::string_view line);

/// Parsers throw ParseError tagged with `line`.
double parse_double(std::string_view s, std::size_t line);
long long parse_int(std::string_view s, std::size_t line);
std::size_t parse_index(std::string_view s, std::size_t line);

/// Calls fn(line_number, content) for each non-blank, non-comment line.
/// Trailing '\r' is stripped.
void for_each_record(std::istream& in,
                     const std::function<void(std::size_t, std::string_view)>& fn);

std::ifstream open_input(const std::filesystem::path& path);

/// Writes `content` to a sibling temp file then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace kprop::text
