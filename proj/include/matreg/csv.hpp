#pragma once

#include <charconv>
#include <cstddef>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "matreg/error.hpp"
#include "matreg/mat.hpp"

namespace matreg {

/// Parses comma-separated numeric rows. Blank lines and lines starting with
/// '#' are skipped; every row must have the same number of fields.
inline std::vector<std::vector<double>> parse_csv_rows(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    const std::size_t line_start = pos;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') continue;

    std::vector<double> row;
    std::size_t field = 0;
    while (true) {
      std::size_t comma = line.find(',', field);
      if (comma == std::string_view::npos) comma = line.size();
      std::string_view tok = line.substr(field, comma - field);
      std::size_t lead = 0;
      while (lead < tok.size() && (tok[lead] == ' ' || tok[lead] == '\t')) ++lead;
      tok.remove_prefix(lead);
      while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
      const std::size_t offset = line_start + field + lead;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("expected a number, found '" + std::string(tok) + "'", offset);
      if (!std::isfinite(v)) throw ParseError("non-finite value", offset);
      row.push_back(v);
      if (comma == line.size()) break;
      field = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError("row has " + std::to_string(row.size()) + " fields, expected " +
                           std::to_string(rows.front().size()),
                       line_start);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

/// Numeric CSV file as a matrix (one row per line).
inline Mat read_csv_matrix(const std::string& path) {
  const auto rows = parse_csv_rows(read_text_file(path));
  if (rows.empty()) throw ParseError("no numeric rows in '" + path + "'", 0);
  std::vector<double> flat;
  flat.reserve(rows.size() * rows.front().size());
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Mat(rows.size(), rows.front().size(), std::move(flat));
}

/// Fixed 17-significant-digit form; reads back to the same double.
inline std::string format_double(double v) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

inline void write_csv_matrix(const Mat& m, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) f << ',';
      f << format_double(m(i, j));
    }
    f << '\n';
  }
  if (!f) throw IoError("write to '" + path + "' failed");
}

}  // namespace matreg
