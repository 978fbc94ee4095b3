#pragma once

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gcp/errors.hpp"

namespace gcp::cli {

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
};

// A command's output: the CSV table plus anything that only the JSON form
// carries (config echo, summaries).
struct Document {
  std::string command;
  nlohmann::json config;
  Table table;
  nlohmann::json summary = nlohmann::json::object();
};

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string format_cell(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

inline nlohmann::json cell_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    return std::isfinite(*d) ? nlohmann::json(*d) : nlohmann::json(nullptr);
  }
  if (const auto* i = std::get_if<long long>(&c)) return *i;
  return std::get<std::string>(c);
}

inline std::string to_csv(const Table& t) {
  std::string s;
  for (std::size_t j = 0; j < t.header.size(); ++j) s += (j ? "," : "") + t.header[j];
  s += '\n';
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw Error("internal: row width does not match header");
    for (std::size_t j = 0; j < row.size(); ++j) s += (j ? "," : "") + format_cell(row[j]);
    s += '\n';
  }
  return s;
}

inline nlohmann::json to_json(const Document& doc) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& row : doc.table.rows) {
    nlohmann::json r = nlohmann::json::object();
    for (std::size_t j = 0; j < row.size(); ++j) r[doc.table.header[j]] = cell_json(row[j]);
    records.push_back(std::move(r));
  }
  return {{"command", doc.command},
          {"config", doc.config},
          {"columns", doc.table.header},
          {"records", std::move(records)},
          {"summary", doc.summary}};
}

inline std::string render(const Document& doc, const std::string& format) {
  if (format == "json") return to_json(doc).dump(2) + "\n";
  if (format == "csv") return to_csv(doc.table);
  throw UsageError("unknown format '" + format + "'");
}

inline void write_text(const std::string& text, const std::string& path, std::ostream& stdout_stream) {
  if (path == "-") {
    stdout_stream << text;
    stdout_stream.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw UsageError("cannot open '" + path + "' for writing: " + std::strerror(errno));
  f << text;
  f.flush();
  if (!f) throw UsageError("write to '" + path + "' failed: " + std::strerror(errno));
}

inline void emit(const Document& doc, const std::string& format, const std::string& path,
                 std::ostream& stdout_stream) {
  write_text(render(doc, format), path, stdout_stream);
}

}  // namespace gcp::cli
