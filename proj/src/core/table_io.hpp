#pragma once

#include <charconv>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace hecon {

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view text);

/// Splits one CSV record; double-quoted fields with "" escapes are honoured.
std::vector<std::string> split_csv_line(std::string_view line);

std::string trim(std::string_view s);

/// Reads a CSV table, skipping blank lines and lines starting with '#'.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;
  std::size_t column(const std::string& name) const;  // npos when absent
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace hecon
