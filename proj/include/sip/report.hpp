#pragma once

// Result tables and diagnostics shared by the command-line front end, with
// lossless CSV and JSON serialization.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sip/error.hpp"

namespace sip {

/// One site; columns of modes that were not run stay empty.
struct ReportRow {
  int site = 0;  // one-based
  std::optional<double> analytic;
  std::optional<double> exact;
  std::optional<double> kmc;
  std::optional<double> kmc_stderr;
  std::optional<double> coefficient;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// One bond (i, i+1); current counted positive toward increasing site index.
struct BondRow {
  int bond = 0;  // one-based left site
  std::optional<double> analytic;
  std::optional<double> kmc;
  std::optional<double> kmc_stderr;

  friend bool operator==(const BondRow&, const BondRow&) = default;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured discrepancy
  double tolerance = 0.0;  // pass iff value <= tolerance
  std::string detail;

  friend bool operator==(const CheckResult&, const CheckResult&) = default;
};

inline CheckResult make_check(std::string name, double value, double tolerance, std::string detail = {}) {
  return {std::move(name), value <= tolerance, value, tolerance, std::move(detail)};
}

struct Report {
  std::string command;
  std::map<std::string, double> params;
  std::vector<ReportRow> rows;
  std::vector<BondRow> bonds;
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<double>> series;
  std::map<std::string, std::string> notes;
  std::vector<CheckResult> checks;

  bool passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return true;
  }

  friend bool operator==(const Report&, const Report&) = default;
};

// ---- number formatting ----

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(text, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("not a number: '" + text + "'");
  }
  if (used != text.size()) throw InvalidArgument("trailing characters in number: '" + text + "'");
  return x;
}

// ---- CSV ----

inline constexpr const char* kSiteHeader = "site,analytic_density,exact_density,kmc_density,kmc_stderr,c_i";
inline constexpr const char* kBondHeader = "bond,analytic_current,kmc_current,kmc_stderr";

namespace detail {

inline std::string csv_field(const std::optional<double>& x) { return x ? format_double(*x) : std::string{}; }

inline std::optional<double> csv_optional(const std::string& field) {
  if (field.empty()) return std::nullopt;
  return parse_double(field);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline int parse_index(const std::string& text) {
  std::size_t used = 0;
  int value = 0;
  try {
    value = std::stoi(text, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("not an index: '" + text + "'");
  }
  if (used != text.size()) throw InvalidArgument("not an index: '" + text + "'");
  return value;
}

template <class Row, class Parse>
std::vector<Row> read_table(std::istream& in, const char* header, std::size_t columns, Parse parse) {
  std::string line;
  if (!std::getline(in, line) || line != header) throw InvalidArgument(std::string("expected CSV header ") + header);
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) break;
    auto fields = split_csv_line(line);
    if (fields.size() != columns) throw InvalidArgument("wrong number of CSV fields in '" + line + "'");
    rows.push_back(parse(fields));
  }
  return rows;
}

}  // namespace detail

inline std::string site_table_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << kSiteHeader << '\n';
  for (const auto& r : rows) {
    out << r.site << ',' << detail::csv_field(r.analytic) << ',' << detail::csv_field(r.exact) << ','
        << detail::csv_field(r.kmc) << ',' << detail::csv_field(r.kmc_stderr) << ','
        << detail::csv_field(r.coefficient) << '\n';
  }
  return out.str();
}

inline std::string bond_table_csv(const std::vector<BondRow>& bonds) {
  std::ostringstream out;
  out << kBondHeader << '\n';
  for (const auto& r : bonds) {
    out << r.bond << ',' << detail::csv_field(r.analytic) << ',' << detail::csv_field(r.kmc) << ','
        << detail::csv_field(r.kmc_stderr) << '\n';
  }
  return out.str();
}

inline std::vector<ReportRow> parse_site_table(std::istream& in) {
  return detail::read_table<ReportRow>(in, kSiteHeader, 6, [](const std::vector<std::string>& f) {
    return ReportRow{detail::parse_index(f[0]), detail::csv_optional(f[1]), detail::csv_optional(f[2]),
                     detail::csv_optional(f[3]), detail::csv_optional(f[4]), detail::csv_optional(f[5])};
  });
}

inline std::vector<BondRow> parse_bond_table(std::istream& in) {
  return detail::read_table<BondRow>(in, kBondHeader, 4, [](const std::vector<std::string>& f) {
    return BondRow{detail::parse_index(f[0]), detail::csv_optional(f[1]), detail::csv_optional(f[2]),
                   detail::csv_optional(f[3])};
  });
}

inline std::vector<ReportRow> parse_site_table(const std::string& text) {
  std::istringstream in(text);
  return parse_site_table(in);
}

inline std::vector<BondRow> parse_bond_table(const std::string& text) {
  std::istringstream in(text);
  return parse_bond_table(in);
}

// ---- JSON ----
// Non-finite numbers are written as the strings "nan", "inf", "-inf".

namespace detail {

inline nlohmann::json json_number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

inline nlohmann::json json_optional(const std::optional<double>& x) {
  return x ? json_number(*x) : nlohmann::json(nullptr);
}

inline double number_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  if (!j.is_number()) throw InvalidArgument("expected a number in JSON report");
  return j.get<double>();
}

inline std::optional<double> optional_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return number_from_json(j);
}

}  // namespace detail

inline nlohmann::json to_json(const Report& r) {
  using nlohmann::json;
  json j;
  j["command"] = r.command;
  json params = json::object();
  for (const auto& [k, v] : r.params) params[k] = detail::json_number(v);
  j["params"] = params;
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"site", row.site},
                    {"analytic_density", detail::json_optional(row.analytic)},
                    {"exact_density", detail::json_optional(row.exact)},
                    {"kmc_density", detail::json_optional(row.kmc)},
                    {"kmc_stderr", detail::json_optional(row.kmc_stderr)},
                    {"c_i", detail::json_optional(row.coefficient)}});
  }
  j["sites"] = rows;
  json bonds = json::array();
  for (const auto& b : r.bonds) {
    bonds.push_back({{"bond", b.bond},
                     {"analytic_current", detail::json_optional(b.analytic)},
                     {"kmc_current", detail::json_optional(b.kmc)},
                     {"kmc_stderr", detail::json_optional(b.kmc_stderr)}});
  }
  j["bonds"] = bonds;
  json scalars = json::object();
  for (const auto& [k, v] : r.scalars) scalars[k] = detail::json_number(v);
  j["scalars"] = scalars;
  json series = json::object();
  for (const auto& [k, values] : r.series) {
    json arr = json::array();
    for (double v : values) arr.push_back(detail::json_number(v));
    series[k] = arr;
  }
  j["series"] = series;
  j["notes"] = r.notes;
  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"value", detail::json_number(c.value)},
                      {"tolerance", detail::json_number(c.tolerance)},
                      {"detail", c.detail}});
  }
  j["checks"] = checks;
  j["passed"] = r.passed();
  return j;
}

inline Report report_from_json(const nlohmann::json& j) {
  Report r;
  r.command = j.at("command").get<std::string>();
  for (const auto& [k, v] : j.at("params").items()) r.params[k] = detail::number_from_json(v);
  for (const auto& row : j.at("sites")) {
    r.rows.push_back({row.at("site").get<int>(), detail::optional_from_json(row.at("analytic_density")),
                      detail::optional_from_json(row.at("exact_density")),
                      detail::optional_from_json(row.at("kmc_density")),
                      detail::optional_from_json(row.at("kmc_stderr")), detail::optional_from_json(row.at("c_i"))});
  }
  for (const auto& b : j.at("bonds")) {
    r.bonds.push_back({b.at("bond").get<int>(), detail::optional_from_json(b.at("analytic_current")),
                       detail::optional_from_json(b.at("kmc_current")),
                       detail::optional_from_json(b.at("kmc_stderr"))});
  }
  for (const auto& [k, v] : j.at("scalars").items()) r.scalars[k] = detail::number_from_json(v);
  for (const auto& [k, arr] : j.at("series").items()) {
    auto& out = r.series[k];
    for (const auto& v : arr) out.push_back(detail::number_from_json(v));
  }
  r.notes = j.at("notes").get<std::map<std::string, std::string>>();
  for (const auto& c : j.at("checks")) {
    r.checks.push_back({c.at("name").get<std::string>(), c.at("passed").get<bool>(),
                        detail::number_from_json(c.at("value")), detail::number_from_json(c.at("tolerance")),
                        c.at("detail").get<std::string>()});
  }
  return r;
}

inline std::string report_json_text(const Report& r) { return to_json(r).dump(2) + "\n"; }

inline Report parse_report_json(const std::string& text) { return report_from_json(nlohmann::json::parse(text)); }

}  // namespace sip
