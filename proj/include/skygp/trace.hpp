#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace skygp {

/// Tab-separated trace with a header row; doubles are written with 17
/// significant digits so values round-trip exactly.
class TraceWriter {
 public:
  TraceWriter() = default;

  void open(const std::string& path, const std::vector<std::string>& columns, bool truncate) {
    path_ = path;
    columns_ = columns;
    std::ofstream out(path, truncate ? std::ios::trunc : std::ios::app);
    if (!out) throw std::runtime_error("cannot open trace file " + path);
    if (truncate) {
      for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) out << '\t';
        out << columns[i];
      }
      out << '\n';
    }
  }

  void append_row(const std::vector<double>& values) const {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to trace file " + path_);
    char buf[40];
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out << '\t';
      std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
      out << buf;
    }
    out << '\n';
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::vector<std::string> columns_;
};

struct TraceData {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw std::runtime_error("trace has no column '" + name + "'");
  }

  std::vector<double> column_values(int col, std::size_t from_row = 0) const {
    std::vector<double> out;
    out.reserve(rows.size() - from_row);
    for (std::size_t r = from_row; r < rows.size(); ++r)
      out.push_back(rows[r][static_cast<std::size_t>(col)]);
    return out;
  }
};

inline TraceData read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file " + path);
  TraceData data;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trace file " + path);
  {
    std::istringstream header(line);
    std::string name;
    while (std::getline(header, name, '\t')) data.columns.push_back(name);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(data.columns.size());
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) row.push_back(std::strtod(field.c_str(), nullptr));
    if (row.size() != data.columns.size())
      throw std::runtime_error("ragged row in trace file " + path);
    data.rows.push_back(std::move(row));
  }
  return data;
}

/// Drops trace rows whose `iteration` exceeds the checkpointed iteration, so
/// a resume continues from a clean prefix no matter where the run was killed.
inline void truncate_trace_after(const std::string& path, long iteration) {
  TraceData data = read_trace(path);
  const int iter_col = data.column("iteration");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot rewrite trace file " + path);
  for (std::size_t i = 0; i < data.columns.size(); ++i) {
    if (i) out << '\t';
    out << data.columns[i];
  }
  out << '\n';
  char buf[40];
  for (const auto& row : data.rows) {
    if (static_cast<long>(row[static_cast<std::size_t>(iter_col)]) > iteration) continue;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << '\t';
      std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace skygp
