#pragma once

// Small file-output helpers shared by the command-line tools: full-precision
// CSV tables and atomic writes (temp file + rename) so partial output never
// lands under the final name.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nvsim {

/// A column-oriented numeric table; all columns must share one length.
struct CsvTable {
  std::vector<std::string> headers;
  std::vector<std::vector<double>> columns;

  void validate() const {
    if (headers.size() != columns.size())
      throw std::invalid_argument("io: header and column counts differ");
    for (const auto& col : columns)
      if (col.size() != columns.front().size())
        throw std::invalid_argument("io: ragged columns");
  }
};

/// Serialize with %.17e so every double survives the round trip.
inline std::string csv_format(const CsvTable& table) {
  table.validate();
  std::ostringstream out;
  for (std::size_t c = 0; c < table.headers.size(); ++c)
    out << (c ? "," : "") << table.headers[c];
  out << '\n';
  const std::size_t rows = table.columns.empty() ? 0 : table.columns.front().size();
  char cell[64];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      std::snprintf(cell, sizeof cell, "%.17e", table.columns[c][r]);
      out << (c ? "," : "") << cell;
    }
    out << '\n';
  }
  return out.str();
}

/// Parse a table written by csv_format (numeric cells, one header row).
inline CsvTable csv_parse(const std::string& text) {
  CsvTable table;
  std::istringstream lines(text);
  std::string line;
  if (!std::getline(lines, line)) throw std::invalid_argument("io: empty csv");
  std::istringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) table.headers.push_back(cell);
  table.columns.assign(table.headers.size(), {});

  std::size_t lineno = 1;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t c = 0;
    while (std::getline(fields, cell, ',')) {
      if (c >= table.columns.size())
        throw std::invalid_argument("io: too many cells on csv line " + std::to_string(lineno));
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("io: non-numeric cell on csv line " + std::to_string(lineno));
      }
      if (used != cell.size())
        throw std::invalid_argument("io: non-numeric cell on csv line " + std::to_string(lineno));
      table.columns[c++].push_back(value);
    }
    if (c != table.columns.size())
      throw std::invalid_argument("io: too few cells on csv line " + std::to_string(lineno));
  }
  return table;
}

/// Write `content` to `path` atomically: a sibling temp file is renamed into
/// place, so readers observe either the old file or the complete new one.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("io: cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("io: short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("io: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

} // namespace nvsim
