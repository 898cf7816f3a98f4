#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace finrisk::csv {

struct Row {
  std::size_t line;  // 1-based line number in the source
  std::vector<std::string> cells;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
};

// Splits one record; double-quoted cells may contain commas and "" escapes.
std::vector<std::string> split_line(std::string_view line);

// Header plus data rows; blank lines are skipped, CR before LF is stripped.
// Throws ParseError when the header is missing or a row has the wrong cell count.
Table read(std::istream& in);
Table read_file(const std::string& path);

// Strict full-cell parse; throws ParseError naming `line` and `column`.
double parse_double(std::string_view cell, std::size_t line, std::string_view column);

// Shortest representation that round-trips exactly.
std::string format_double(double v);

}  // namespace finrisk::csv
