#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pricecast::io {

/// Splits one CSV line on the delimiter. No quoting support: the order
/// exports and every file this tool writes are plain delimited text.
std::vector<std::string> split_line(const std::string& line, char delimiter);

std::string trim(const std::string& s);

/// Strict decimal parse with '.' as the only accepted separator. Comma
/// decimals or trailing junk throw std::invalid_argument.
double parse_double(std::string_view text);

long long parse_int(std::string_view text);

/// Shortest decimal representation that round-trips the double exactly
/// (std::to_chars). Keeps every CSV and JSON we emit byte-stable.
std::string format_double(double x);

std::string read_file(const std::filesystem::path& path);

/// Whole-file atomic write: the content goes to a temporary sibling first
/// and is renamed over the target, so readers never observe a partial file.
void write_atomic(const std::filesystem::path& path, std::string_view content);

}
