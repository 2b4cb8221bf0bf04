#include "rbmcda/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>

#include "rbmcda/scenario.hpp"

namespace rbmcda::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

int Header::find(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int Header::index_of(std::string_view name) const {
  const int i = find(name);
  if (i < 0) throw ParseError("csv: missing column '" + std::string(name) + "'", line);
  return i;
}

const std::string& Row::get(int col) const { return fields.at(static_cast<std::size_t>(col)); }

double Row::get_double(int col) const {
  const auto& f = get(col);
  if (f == "inf") return INFINITY;
  if (f == "-inf") return -INFINITY;
  if (f == "nan") return NAN;
  double v = 0.0;
  const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
    throw ParseError("csv: line " + std::to_string(line) + ": cannot parse '" + f + "' as a number", line);
  }
  return v;
}

long Row::get_int(int col) const {
  const auto& f = get(col);
  long v = 0;
  const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
    throw ParseError("csv: line " + std::to_string(line) + ": cannot parse '" + f + "' as an integer", line);
  }
  return v;
}

Reader::Reader(std::istream& in) : in_(in) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const auto pos = t.find("format_version=");
      if (pos != std::string_view::npos) {
        const auto v = t.substr(pos + 15);
        std::from_chars(v.data(), v.data() + v.size(), header_.format_version);
      }
      continue;
    }
    header_.names = split(t);
    header_.line = line_;
    return;
  }
  throw ParseError("csv: missing header row", line_);
}

bool Reader::next(Row& row) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    row.fields = split(t);
    row.line = line_;
    if (row.fields.size() != header_.names.size()) {
      throw ParseError("csv: line " + std::to_string(line_) + ": expected " + std::to_string(header_.names.size()) +
                           " fields, got " + std::to_string(row.fields.size()),
                       line_);
    }
    return true;
  }
  return false;
}

}  // namespace rbmcda::csv
