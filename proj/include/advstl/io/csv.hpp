#pragma once

/*!
  \file csv.hpp
  \brief Locale-independent CSV output.

  Numbers use the shortest representation that parses back to the same
  double, with '.' as the decimal separator. Rows end with '\n'.
*/

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace advstl::io {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  if (r.ec != std::errc{}) throw std::runtime_error("cannot format number");
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

/// Builds one row at a time; call end() to emit it.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  CsvWriter& header(const std::vector<std::string>& cols) {
    for (const auto& c : cols) cell(c);
    return end();
  }

  CsvWriter& cell(std::string_view s) {
    sep();
    if (s.find_first_of(",\"\n") == std::string_view::npos) {
      out_ << s;
    } else {
      out_ << '"';
      for (char c : s) out_ << (c == '"' ? "\"\"" : std::string(1, c));
      out_ << '"';
    }
    return *this;
  }
  CsvWriter& cell(const char* s) { return cell(std::string_view(s)); }
  CsvWriter& cell(double v) { return raw(format_double(v)); }
  CsvWriter& cell(std::size_t v) { return raw(std::to_string(v)); }
  CsvWriter& cell(bool v) { return raw(v ? "1" : "0"); }
  CsvWriter& empty() { return raw(""); }

  CsvWriter& end() {
    out_ << '\n';
    first_ = true;
    return *this;
  }

 private:
  CsvWriter& raw(const std::string& s) {
    sep();
    out_ << s;
    return *this;
  }
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }

  std::ostream& out_;
  bool first_ = true;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::invalid_argument("CSV has no column '" + std::string(name) + "'");
  }
};

/// Minimal reader for the unquoted numeric tables this library writes.
inline CsvTable read_csv(std::istream& in) {
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  };
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("CSV is empty");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto row = split(line);
    if (row.size() != t.header.size())
      throw std::invalid_argument("CSV row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(row.size()) +
                                  " cells, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  return read_csv(in);
}

}  // namespace advstl::io
