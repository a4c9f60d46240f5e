#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace parvi::io {

/// Writes to a temporary sibling file and renames it over `path`.
void write_text_atomic(const std::string& path, std::string_view content);

std::string read_text(const std::string& path);

/// Shortest round-trip decimal representation ("%.17g"); empty string for NaN.
std::string format_double(double v);

std::vector<std::string> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace parvi::io
