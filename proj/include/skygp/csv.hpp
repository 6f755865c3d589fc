#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace skygp {

// Minimal RFC-4180-style CSV handling: quoted fields, doubled quotes,
// bare CR/LF line endings. Embedded newlines inside quotes are not needed
// by any of our formats and are rejected.
namespace csv {

inline std::vector<std::string> split_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c == '\r') {
      // tolerated; stripped
    } else {
      cur += c;
    }
  }
  if (quoted) throw std::runtime_error("unterminated quote on CSV line " + std::to_string(line_no));
  fields.push_back(cur);
  return fields;
}

// Empty lines are kept as single empty fields (a one-column row may be
// legitimately missing); the final newline terminator adds no row.
inline std::vector<std::vector<std::string>> parse(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    line.assign(text, start, end - start);
    ++line_no;
    rows.push_back(split_line(line, line_no));
    start = end + 1;
  }
  return rows;
}

inline std::string quote(const std::string& field) {
  bool needs = false;
  for (char c : field)
    if (c == ',' || c == '"' || c == '\n' || c == '\r') needs = true;
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += '"';
  return out;
}

inline std::string join_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += quote(fields[i]);
  }
  out += '\n';
  return out;
}

inline std::string format(double v, const char* fmt = "%.10g") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace csv

}  // namespace skygp
