#pragma once

// File formats for the command-line pipeline. Needs the single-header
// nlohmann/json (vendor/json.hpp) on the include path.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lapfield/covariance.hpp"
#include "lapfield/distributions.hpp"
#include "lapfield/error.hpp"
#include "lapfield/inference.hpp"
#include "lapfield/laplace_field.hpp"

namespace lapfield::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "lapfield/1";

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Shortest round-trip decimal form.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  ///< 1-based source line of each row

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
  int require(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw schema_error(path + ":1: missing column '" + name + "'");
    return c;
  }
};

inline std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r\"");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\"");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Comma-separated table with a header row. Blank lines and lines starting
/// with '#' are skipped.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw schema_error(path + ": cannot open file");
  CsvTable t;
  t.path = path;
  std::string line;
  std::size_t no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw schema_error(path + ":" + std::to_string(no) + ": expected " + std::to_string(t.header.size()) +
                         " fields, found " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.lines.push_back(no);
  }
  if (!have_header) throw schema_error(path + ": empty file");
  return t;
}

inline double parse_number(const CsvTable& t, std::size_t row, int col, bool allow_missing = false) {
  const std::string& s = t.rows[row][static_cast<std::size_t>(col)];
  if (allow_missing && (s.empty() || s == "NA" || s == "NaN" || s == "nan"))
    return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    throw schema_error(t.path + ":" + std::to_string(t.lines[row]) + ": column '" + t.header[static_cast<std::size_t>(col)] +
                       "': not a number: '" + s + "'");
  return v;
}

/// Sites file: columns id, x, y, covariate (coordinates in km).
inline SiteSet read_sites_csv(const std::string& path) {
  const auto t = read_csv(path);
  const int ci = t.require("id"), cx = t.require("x"), cy = t.require("y"), cc = t.require("covariate");
  SiteSet s;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    s.push_back(t.rows[r][static_cast<std::size_t>(ci)], {parse_number(t, r, cx), parse_number(t, r, cy)},
                parse_number(t, r, cc));
  if (s.empty()) throw schema_error(path + ": no sites");
  s.validate();
  return s;
}

/// Wide data file: date, site_1, ..., site_D. Missing values (empty or NA)
/// drop the whole row.
inline Dataset read_data_csv(const std::string& path) {
  const auto t = read_csv(path);
  if (t.header.size() < 2) throw schema_error(path + ":1: need a date column and at least one site column");
  std::vector<std::string> ids(t.header.begin() + 1, t.header.end());
  std::vector<std::string> times;
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    times.push_back(t.rows[r][0]);
    std::vector<double> v;
    for (std::size_t c = 1; c < t.header.size(); ++c) v.push_back(parse_number(t, r, static_cast<int>(c), true));
    rows.push_back(std::move(v));
  }
  return Dataset::from_rows(std::move(ids), times, rows);
}

/// Reorders sites to the data columns; every data column must be a known site.
inline SiteSet sites_for_columns(const SiteSet& sites, const std::vector<std::string>& columns) {
  SiteSet out;
  for (const auto& id : columns) {
    const auto k = sites.index_of(id);
    if (!k) throw schema_error("data column '" + id + "' is not in the sites file");
    out.push_back(id, sites.coords[*k], sites.covariate[*k]);
  }
  return out;
}

/// CSV writer; an optional leading comment line carries metadata.
inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows, const std::string& comment = "") {
  std::ofstream out(path);
  if (!out) throw schema_error(path + ": cannot write file");
  if (!comment.empty()) out << "# " << comment << '\n';
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << '\n';
  }
  if (!out) throw schema_error(path + ": write failed");
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw schema_error(path + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw schema_error(path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw schema_error(path + ": cannot write file");
  out << j.dump(2) << '\n';
}

template <class T>
T get_field(const json& j, const char* key, const char* where) {
  if (!j.contains(key)) throw schema_error(std::string(where) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw schema_error(std::string(where) + ": field '" + key + "' has the wrong type");
  }
}

inline json to_json(const WeibullTail& w) {
  return json{{"gamma", w.gamma}, {"delta0", w.delta0}, {"delta1", w.delta1}, {"threshold_u", w.threshold_u}};
}

inline WeibullTail weibull_from_json(const json& j) {
  WeibullTail w;
  w.gamma = get_field<double>(j, "gamma", "margins");
  w.delta0 = get_field<double>(j, "delta0", "margins");
  w.delta1 = get_field<double>(j, "delta1", "margins");
  w.threshold_u = j.value("threshold_u", 0.0);
  if (!(w.gamma > 0.0)) throw schema_error("margins: gamma must be positive");
  return w;
}

inline json to_json(const CorrelationSpec& s) {
  return json{{"family", to_string(s.family)}, {"scale", s.scale},   {"shape", s.shape},
              {"theta", s.theta},              {"b", s.b},           {"anisotropic", s.anisotropic}};
}

inline CorrelationSpec spec_from_json(const json& j) {
  CorrelationSpec s;
  try {
    s.family = parse_family(get_field<std::string>(j, "family", "correlation"));
  } catch (const domain_error& e) {
    throw schema_error(std::string("correlation: ") + e.what());
  }
  s.scale = get_field<double>(j, "scale", "correlation");
  s.shape = j.value("shape", 1.0);
  s.theta = j.value("theta", 0.0);
  s.b = j.value("b", 1.0);
  s.anisotropic = j.value("anisotropic", false);
  try {
    s.validate();
  } catch (const domain_error& e) {
    throw schema_error(std::string("correlation: ") + e.what());
  }
  return s;
}

inline json to_json(const SiteSet& s) {
  json a = json::array();
  for (std::size_t i = 0; i < s.size(); ++i)
    a.push_back(json{{"id", s.ids[i]}, {"x", s.coords[i][0]}, {"y", s.coords[i][1]}, {"covariate", s.covariate[i]}});
  return a;
}

inline SiteSet sites_from_json(const json& a) {
  if (!a.is_array()) throw schema_error("sites: expected an array");
  SiteSet s;
  for (const auto& e : a)
    s.push_back(get_field<std::string>(e, "id", "sites"),
                {get_field<double>(e, "x", "sites"), get_field<double>(e, "y", "sites")},
                get_field<double>(e, "covariate", "sites"));
  s.validate();
  return s;
}

/// Fitted field: dependence type, correlation on the fitted sites, and
/// optionally the Weibull margins.
struct ModelFile {
  DepType dep = DepType::laplace;
  CorrelationSpec spec;
  SiteSet sites;
  std::optional<WeibullTail> margins;
  json fit = json::object();  ///< loglik, aic, threshold and similar
};

inline std::string model_hash(const json& body) { return hex64(fnv1a64(body.dump())); }

inline json to_json(const ModelFile& m) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "model";
  j["dep_type"] = to_string(m.dep);
  j["correlation"] = to_json(m.spec);
  j["sites"] = to_json(m.sites);
  if (m.margins) j["margins"] = to_json(*m.margins);
  j["fit"] = m.fit;
  j["model_hash"] = model_hash(j);
  return j;
}

inline void check_schema(const json& j, const std::string& where) {
  if (!j.is_object()) throw schema_error(where + ": expected a JSON object");
  const auto v = j.value("schema_version", std::string{});
  if (v != kSchemaVersion) throw schema_error(where + ": unsupported schema_version '" + v + "'");
}

inline ModelFile model_from_json(const json& j, const std::string& where = "model") {
  check_schema(j, where);
  ModelFile m;
  try {
    m.dep = parse_dep_type(get_field<std::string>(j, "dep_type", where.c_str()));
  } catch (const domain_error& e) {
    throw schema_error(where + ": " + e.what());
  }
  if (!j.contains("correlation")) throw schema_error(where + ": missing field 'correlation'");
  m.spec = spec_from_json(j.at("correlation"));
  if (!j.contains("sites")) throw schema_error(where + ": missing field 'sites'");
  m.sites = sites_from_json(j.at("sites"));
  if (j.contains("margins")) m.margins = weibull_from_json(j.at("margins"));
  if (j.contains("fit")) m.fit = j.at("fit");
  if (j.contains("model_hash")) {
    json body = j;
    body.erase("model_hash");
    if (model_hash(body) != j.at("model_hash").get<std::string>())
      throw schema_error(where + ": model_hash does not match contents");
  }
  return m;
}

}  // namespace lapfield::io
