// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace disagg::util {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::vector<std::string> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);

}  // namespace disagg::util
