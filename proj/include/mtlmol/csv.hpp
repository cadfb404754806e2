#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mtlmol::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  // Column index or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
};

// Comma-separated, first row header, optional double quotes, CRLF tolerated.
// Blank lines are skipped. Throws DataError("FileNotFound") / ("MalformedRow").
Table read(const std::filesystem::path& path);
Table parse(std::string_view text);

std::vector<std::string> split_line(std::string_view line);

// Strict double parse (full string must be consumed); accepts exponents.
std::optional<double> parse_double(std::string_view s);

// Shortest representation that reads back to the same double.
std::string format_double(double v);

}  // namespace mtlmol::csv
