#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qclock {

// Floats are written with 17 significant digits so re-parsing recovers the
// exact double.
inline std::string csv_format(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : path_(path), out_(path) {
    if (!out_) throw std::runtime_error("cannot open output file: " + path);
  }

  void meta(const std::string& key, const std::string& value) {
    out_ << "# " << key << "=" << value << "\n";
  }
  void meta(const std::string& key, double value) { meta(key, csv_format(value)); }
  void meta(const std::string& key, long long value) { meta(key, std::to_string(value)); }

  void header(const std::vector<std::string>& columns) {
    for (std::size_t i = 0; i < columns.size(); ++i)
      out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

  void row(const std::vector<double>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << (i ? "," : "") << csv_format(cells[i]);
    out_ << "\n";
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> comments;  // '#'-prefixed metadata lines, prefix stripped
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  double value(std::size_t r, std::size_t c) const { return std::stod(rows.at(r).at(c)); }
  int column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv: " + path);
  CsvTable table;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string c = line.substr(1);
      if (!c.empty() && c[0] == ' ') c.erase(0, 1);
      table.comments.push_back(c);
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!saw_header) {
      table.columns = cells;
      saw_header = true;
    } else {
      table.rows.push_back(cells);
    }
  }
  return table;
}

}  // namespace qclock
