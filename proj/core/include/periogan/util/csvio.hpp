#pragma once

#include <string>
#include <vector>

namespace periogan {

/// Shortest round-trip decimal rendering of a double. Used everywhere a
/// numeric value lands in a CSV or JSON report so that re-running a
/// deterministic pipeline emits byte-identical files.
std::string format_number(double value);

std::string join_csv(const std::vector<std::string>& fields);

std::vector<std::string> split_csv_line(const std::string& line);

/// Reads a whole CSV file (no quoting / embedded separators; our files never
/// need them). Returns rows of fields, including the header row.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

std::string read_text_file(const std::string& path);

}  // namespace periogan
