#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace matgi {

// Shortest-safe decimal rendering: 17 significant digits, so parsing the
// result yields the identical double.
std::string format_double(double value);

// Strict full-string parse; returns false on trailing garbage, empty input
// or out-of-range values.
bool parse_double(std::string_view text, double& out);

std::vector<std::string> split_whitespace(std::string_view line);

std::string_view trim(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

// One sentence per non-blank line, whitespace tokenized.
std::vector<std::vector<std::string>> parse_sentences(std::string_view text);

std::vector<std::string> split_lines(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace matgi
