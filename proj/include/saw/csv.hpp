#ifndef SAW_CSV_HPP
#define SAW_CSV_HPP

#include <cstddef>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "saw/errors.hpp"

namespace saw {

/// 17 significant digits: round-trips every double exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Header plus rows of string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DataError("missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

/// Row-at-a-time writer; creates parent directories.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw DataError(path.string() + ": cannot open for writing");
    write_cells(header);
  }

  void write_cells(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    if (!out_) throw DataError(path_.string() + ": write failed");
  }

  /// Step index followed by numeric columns.
  void write_row(unsigned long long k, const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size() + 1);
    cells.push_back(std::to_string(k));
    for (double v : values) cells.push_back(format_double(v));
    write_cells(cells);
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                      " columns, got " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline double parse_number(const std::string& cell, const std::string& where) {
  // strtod rather than stod: subnormal values are valid data, not range errors.
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (cell.empty() || end != begin + cell.size() || std::isnan(v))
    throw DataError(where + ": not a number: '" + cell + "'");
  return v;
}

/// Numeric view of a table whose first column is the step index k.
struct NumericTable {
  std::vector<std::string> header;
  std::vector<unsigned long long> k;
  std::vector<std::vector<double>> values;  ///< row-major, header.size() - 1 columns
};

inline NumericTable read_numeric_csv(const std::filesystem::path& path, const std::vector<std::string>& expected = {}) {
  const CsvTable t = read_csv(path);
  if (t.header.empty() || t.header[0] != "k") throw DataError(path.string() + ": first column must be 'k'");
  if (!expected.empty() && t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw DataError(path.string() + ": header mismatch, expected '" + want + "'");
  }
  NumericTable out;
  out.header = t.header;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path.string() + ":" + std::to_string(r + 2);
    const double k = parse_number(t.rows[r][0], where);
    if (k < 0 || k != static_cast<double>(static_cast<unsigned long long>(k))) throw DataError(where + ": bad step index");
    out.k.push_back(static_cast<unsigned long long>(k));
    std::vector<double> row;
    for (std::size_t c = 1; c < t.rows[r].size(); ++c) row.push_back(parse_number(t.rows[r][c], where));
    out.values.push_back(std::move(row));
  }
  return out;
}

}  // namespace saw

#endif  // SAW_CSV_HPP
