#pragma once

// Small text helpers shared by the file formats. Not installed.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace duckling::text {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

/// Split a text into lines on LF, dropping a trailing CR and a final empty line.
std::vector<std::string_view> split_lines(std::string_view text);

/// RFC-4180 style field split (double-quoted fields, "" escapes). nullopt on an unterminated quote.
std::optional<std::vector<std::string>> split_csv(std::string_view line);

/// Quote a field only when it contains a comma, quote, CR or LF.
std::string csv_field(std::string_view field);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Strict full-string parse; nullopt on junk or empty input. Accepts "inf"/"nan".
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

}  // namespace duckling::text
