#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rbmcda::csv {

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

struct Header {
  std::vector<std::string> names;
  int line = 0;
  int format_version = 0;  // 0 when the file has no version line

  int find(std::string_view name) const;
  /// Like find, but throws ParseError when the column is missing.
  int index_of(std::string_view name) const;
};

struct Row {
  std::vector<std::string> fields;
  int line = 0;

  double get_double(int col) const;
  long get_int(int col) const;
  const std::string& get(int col) const;
};

/// Minimal comma-separated reader: '#' comment lines, one header row, no
/// quoting. Field count mismatches raise ParseError with the line number.
class Reader {
 public:
  explicit Reader(std::istream& in);

  const Header& header() const { return header_; }
  bool next(Row& row);

 private:
  std::istream& in_;
  Header header_;
  int line_ = 0;
};

std::vector<std::string> split(std::string_view line, char sep = ',');

}  // namespace rbmcda::csv
