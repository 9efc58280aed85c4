#pragma once

// Tidy report records (metric, seed, param, value) with CSV and JSON export.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fppgeo/error.hpp"
#include "fppgeo/format.hpp"

namespace fppgeo {

struct Record {
  std::string metric;
  std::optional<std::int64_t> seed;  // empty for aggregates
  std::string param;
  double value = 0.0;

  friend bool operator==(const Record&, const Record&) = default;
};

struct Report {
  std::string kind;
  std::vector<Record> records;
  nlohmann::json summary = nlohmann::json::object();

  void add(std::string metric, std::optional<std::int64_t> seed, std::string param, double value) {
    records.push_back({std::move(metric), seed, std::move(param), value});
  }

  friend bool operator==(const Report&, const Report&) = default;
};

enum class ExportFormat { kCsv, kJson };

inline ExportFormat parse_format(const std::string& s) {
  if (s == "csv") return ExportFormat::kCsv;
  if (s == "json") return ExportFormat::kJson;
  throw Error(ErrorCode::kUnsupportedFormat, "unsupported export format '" + s + "' (expected csv or json)");
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace detail

/// Header metric,seed,param,value; seed empty for aggregate rows.
inline void write_report_csv(std::ostream& os, const Report& r) {
  os << "metric,seed,param,value\n";
  for (const auto& rec : r.records) {
    os << detail::csv_field(rec.metric) << ',';
    if (rec.seed) os << *rec.seed;
    os << ',' << detail::csv_field(rec.param) << ',' << format_double(rec.value) << '\n';
  }
}

inline nlohmann::json to_json(const Report& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& rec : r.records) {
    rows.push_back({rec.metric, rec.seed ? nlohmann::json(*rec.seed) : nlohmann::json(nullptr), rec.param, rec.value});
  }
  return {{"kind", r.kind}, {"summary", r.summary}, {"records", rows}};
}

inline Report report_from_json(const nlohmann::json& j) {
  try {
    Report r;
    r.kind = j.at("kind").get<std::string>();
    r.summary = j.at("summary");
    for (const auto& row : j.at("records")) {
      Record rec;
      rec.metric = row.at(0).get<std::string>();
      if (!row.at(1).is_null()) rec.seed = row.at(1).get<std::int64_t>();
      rec.param = row.at(2).get<std::string>();
      rec.value = row.at(3).get<double>();
      r.records.push_back(std::move(rec));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("report: ") + e.what());
  }
}

inline void export_report(std::ostream& os, const Report& r, ExportFormat format) {
  if (format == ExportFormat::kCsv) {
    write_report_csv(os, r);
  } else {
    os << to_json(r).dump(2) << '\n';
  }
}

inline void export_report(std::ostream& os, const Report& r, const std::string& format) {
  export_report(os, r, parse_format(format));
}

}  // namespace fppgeo
