#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "errors.hpp"

namespace qfldp {

// shortest text that reads back to the same double
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// JSON has no infinities; they become null
inline json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : cols_(header.size()) { row_strings(header); }

  void row(const std::vector<double>& values) {
    std::vector<std::string> s;
    for (double v : values) s.push_back(fmt_double(v));
    row_strings(s);
  }

  void row_strings(const std::vector<std::string>& cells) {
    if (cells.size() != cols_) throw DataError("csv row has the wrong number of columns");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += escape(cells[i]);
    }
    text_ += '\n';
  }

  const std::string& text() const { return text_; }

 private:
  static std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  }

  std::size_t cols_;
  std::string text_;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot write " + path.string());
  out << text;
  if (!out) throw ResourceError("short write on " + path.string());
}

inline std::string curve_csv(const GeneratingCurve& c) {
  CsvWriter w({"s", "J", "dJ", "d2J"});
  for (std::size_t i = 0; i < c.s.size(); ++i) w.row({c.s[i], c.J[i], c.dJ[i], c.d2J[i]});
  return w.text();
}

}  // namespace qfldp
