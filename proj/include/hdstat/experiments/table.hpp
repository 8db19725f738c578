#pragma once

// Result tables and their CSV form: header of column names, one row per
// record, 17 significant digits, LF line endings. Infinities are written as
// "inf" / "-inf"; NaN is rejected.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include "hdstat/errors.hpp"

namespace hdstat {

using Cell = std::variant<double, std::int64_t, std::string>;

struct Column {
  std::string name;
  std::string unit;
};

struct ResultTable {
  std::vector<Column> columns;
  std::vector<std::vector<Cell>> rows;
  std::map<std::string, std::string> metadata;

  ResultTable() = default;
  explicit ResultTable(std::vector<Column> cols) : columns(std::move(cols)) {}

  void add_row(std::vector<Cell> row) {
    detail::require(row.size() == columns.size(),
                    "ResultTable: row has " + std::to_string(row.size()) + " cells, table has " +
                        std::to_string(columns.size()) + " columns");
    for (const Cell& c : row)
      if (const auto* d = std::get_if<double>(&c))
        detail::require(!std::isnan(*d), "ResultTable: NaN cells are not allowed");
    rows.push_back(std::move(row));
  }

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return i;
    throw InvalidArgument("ResultTable: unknown column '" + name + "'");
  }

  std::vector<double> numeric_column(const std::string& name) const;
};

/// Numeric value of a cell; strings parse as numbers or give NaN.
inline double cell_value(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  const std::string& s = std::get<std::string>(c);
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return (ec == std::errc() && ptr == s.data() + s.size()) ? v : NAN;
}

inline std::vector<double> ResultTable::numeric_column(const std::string& name) const {
  const std::size_t j = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(cell_value(row[j]));
  return out;
}

inline std::string format_number(double v) {
  if (std::isnan(v)) throw InvalidArgument("format_number: NaN cannot be emitted");
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

namespace detail {

inline std::string csv_field(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  const std::string& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  return quoted + '"';
}

inline Cell parse_field(const std::string& s) {
  std::int64_t i = 0;
  {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
    if (!s.empty() && ec == std::errc() && ptr == s.data() + s.size()) return i;
  }
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double d = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (!s.empty() && ec == std::errc() && ptr == s.data() + s.size()) return d;
  return s;
}

// Splits one CSV record starting at pos; advances pos past the line end.
inline std::vector<std::string> split_record(const std::string& text, std::size_t& pos) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  while (pos < text.size()) {
    const char ch = text[pos++];
    if (quoted) {
      if (ch == '"') {
        if (pos < text.size() && text[pos] == '"') {
          field += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch != '\r') {
      field += ch;
    }
  }
  if (quoted) throw InvalidArgument("parse_csv: unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace detail

inline std::string csv_string(const ResultTable& table) {
  std::string out;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (j) out += ',';
    out += detail::csv_field(table.columns[j].name);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += detail::csv_field(row[j]);
    }
    out += '\n';
  }
  return out;
}

inline void emit_csv(const ResultTable& table, const std::string& path) {
  const std::string text = csv_string(table);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out.flush()) throw IoError("write failed for " + path);
}

/// Inverse of csv_string. Integers become int64 cells, other numbers and
/// "inf" become doubles, anything else stays a string. Units are not stored.
inline ResultTable parse_csv(const std::string& text) {
  ResultTable table;
  std::size_t pos = 0;
  if (text.empty()) throw InvalidArgument("parse_csv: empty input");
  for (auto& name : detail::split_record(text, pos)) table.columns.push_back({name, ""});
  while (pos < text.size()) {
    auto fields = detail::split_record(text, pos);
    if (fields.size() == 1 && fields[0].empty()) continue;
    std::vector<Cell> row;
    for (const auto& f : fields) row.push_back(detail::parse_field(f));
    table.add_row(std::move(row));
  }
  return table;
}

inline ResultTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

}  // namespace hdstat
