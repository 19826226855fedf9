#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace equiplan::csv {

struct Table {
  std::vector<std::string> header;
  // Each record keeps its 1-based line number for diagnostics.
  struct Record {
    std::size_t line = 0;
    std::vector<std::string> fields;
  };
  std::vector<Record> records;

  /// Column index of `name`, or throws LoadError naming the file.
  std::size_t column(std::string_view name, std::string_view file) const;
};

/// RFC-4180-ish reader: comma separated, optional double quotes, UTF-8.
/// Blank lines are skipped. Throws LoadError if the file cannot be opened
/// or has no header row.
Table read_file(const std::string& path);
Table parse(std::string_view text, std::string_view label);

/// Shortest representation that round-trips exactly.
std::string format_double(double v);

/// Strict numeric parsing; the whole field must be consumed.
bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, long long& out);

/// Quotes the field if it contains a comma, quote, or newline.
std::string escape(std::string_view field);

}  // namespace equiplan::csv
