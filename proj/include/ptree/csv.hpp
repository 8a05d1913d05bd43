#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ptree/dataset.hpp"
#include "ptree/errors.hpp"

namespace ptree {

namespace detail {

inline bool parse_double(std::string_view field, double& out) {
  // Trim surrounding whitespace; '.' is the only accepted decimal separator
  // (std::from_chars is locale-independent).
  std::size_t b = field.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return false;
  std::size_t e = field.find_last_not_of(" \t\r");
  field = field.substr(b, e - b + 1);
  auto res = std::from_chars(field.data(), field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

inline std::vector<std::string_view> split_fields(const std::string& line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.emplace_back(line.data() + start, i - start);
      start = i + 1;
    }
  }
  return out;
}

}  // namespace detail

// One row per observation, d numeric columns, optional header row. Any row
// that fails to parse aborts with its line number.
inline Dataset read_csv(std::istream& in, Region bounds, const std::string& origin = "<input>") {
  std::vector<double> rows;
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t d = 0, lineno = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    detail::split_fields(line, fields);
    std::vector<double> vals(fields.size());
    bool ok = true;
    for (std::size_t j = 0; j < fields.size(); ++j)
      if (!detail::parse_double(fields[j], vals[j])) { ok = false; break; }
    if (first_content) {
      if (!ok) continue;  // header row
      first_content = false;
      d = fields.size();
    } else if (!ok || fields.size() != d) {
      throw data_error(origin + ": malformed row at line " + std::to_string(lineno));
    }
    rows.insert(rows.end(), vals.begin(), vals.end());
  }
  if (d == 0) d = bounds.dim() ? bounds.dim() : 1;
  if (bounds.lower.empty()) bounds = Region::unit_cube(d);
  if (bounds.dim() != d)
    throw data_error(origin + ": expected " + std::to_string(bounds.dim()) + " columns, found " +
                     std::to_string(d));
  // Re-check bounds with line attribution.
  for (std::size_t i = 0; i * d < rows.size(); ++i)
    if (!bounds.contains(rows.data() + i * d))
      throw data_error(origin + ": observation " + std::to_string(i + 1) + " outside declared bounds");
  return Dataset::from_rows(std::move(rows), d, std::move(bounds));
}

inline Dataset read_csv_file(const std::string& path, Region bounds = {}) {
  std::ifstream f(path);
  if (!f) throw data_error(path + ": cannot open");
  return read_csv(f, std::move(bounds), path);
}

// 17 significant digits guarantee that doubles round-trip through text.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_csv_matrix(std::ostream& out, const std::vector<double>& rows, std::size_t cols,
                             const std::string& header = "") {
  if (!header.empty()) out << header << "\n";
  for (std::size_t i = 0; i * cols < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (j) out << ',';
      out << format_double(rows[i * cols + j]);
    }
    out << "\n";
  }
}

}  // namespace ptree
