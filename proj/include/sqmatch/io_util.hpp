#pragma once

#include <string>
#include <vector>

namespace sqmatch {

/// Formats a double with 17 significant digits (round-trip safe).
std::string format_double(double v);

std::vector<std::string> split_csv_line(const std::string& line);

/// Reads a whole text file, throwing Error("io.not_found") if missing.
std::string read_text_file(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

/// Parses CSV with a header line; returns rows of fields.
std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               std::vector<std::string>* header = nullptr);

} // namespace sqmatch
