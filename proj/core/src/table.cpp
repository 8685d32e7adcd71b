#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "vard/datakit.hpp"
#include "vard/error.hpp"

namespace vard::datakit {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

Role parse_role(const std::string& s) {
  if (s == "response") return Role::kResponse;
  if (s == "numeric") return Role::kNumeric;
  if (s == "categorical") return Role::kCategorical;
  if (s == "excluded") return Role::kExcluded;
  throw Error(ErrorCode::kParse, "unknown column role '" + s + "'");
}

const char* role_name(Role r) {
  switch (r) {
    case Role::kResponse: return "response";
    case Role::kNumeric: return "numeric";
    case Role::kCategorical: return "categorical";
    case Role::kExcluded: return "excluded";
  }
  return "excluded";
}

ColumnTransform parse_transform(const std::string& s) {
  if (s == "none") return ColumnTransform::kNone;
  if (s == "log") return ColumnTransform::kLog;
  throw Error(ErrorCode::kParse, "unknown column transform '" + s + "'");
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan" || cell == "?";
}

double parse_number(const std::string& cell, const std::string& column, std::size_t row) {
  const std::string where = "column '" + column + "', row " + std::to_string(row);
  if (is_missing(cell)) throw Error(ErrorCode::kParse, "missing value in " + where);
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || errno == ERANGE) {
    throw Error(ErrorCode::kParse, "cannot parse '" + cell + "' as a number in " + where);
  }
  if (!std::isfinite(value)) throw Error(ErrorCode::kNonFinite, "non-finite value in " + where);
  return value;
}

}  // namespace

const ColumnSpec& TableSpec::response() const {
  const ColumnSpec* found = nullptr;
  for (const auto& c : columns) {
    if (c.role != Role::kResponse) continue;
    if (found) throw Error(ErrorCode::kInvalidArgument, "more than one response column");
    found = &c;
  }
  if (!found) throw Error(ErrorCode::kInvalidArgument, "no response column");
  return *found;
}

TableSpec TableSpec::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("table spec: ") + e.what());
  }
  TableSpec spec;
  try {
    const int default_knots = doc.value("default_knots", 10);
    const std::string delim = doc.value("delimiter", std::string(","));
    if (delim.size() != 1) throw Error(ErrorCode::kParse, "table spec: delimiter must be one character");
    spec.delimiter = delim[0];
    for (const auto& col : doc.at("columns")) {
      ColumnSpec c;
      c.name = col.at("name").get<std::string>();
      c.role = parse_role(col.value("role", std::string("numeric")));
      c.transform = parse_transform(col.value("transform", std::string("none")));
      c.knot_count = col.value("knots", default_knots);
      if (c.knot_count < 3) {
        throw Error(ErrorCode::kInvalidArgument, "column '" + c.name + "': knots must be at least 3");
      }
      if (c.transform == ColumnTransform::kLog && c.role == Role::kCategorical) {
        throw Error(ErrorCode::kInvalidArgument, "column '" + c.name + "': log transform on a categorical column");
      }
      spec.columns.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("table spec: ") + e.what());
  }
  std::unordered_map<std::string, int> seen;
  for (const auto& c : spec.columns) {
    if (seen[c.name]++) throw Error(ErrorCode::kInvalidArgument, "column '" + c.name + "' listed twice");
  }
  (void)spec.response();
  return spec;
}

TableSpec TableSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string TableSpec::to_json() const {
  json doc;
  doc["delimiter"] = std::string(1, delimiter);
  doc["columns"] = json::array();
  for (const auto& c : columns) {
    doc["columns"].push_back({{"name", c.name},
                              {"role", role_name(c.role)},
                              {"transform", c.transform == ColumnTransform::kLog ? "log" : "none"},
                              {"knots", c.knot_count}});
  }
  return doc.dump(2);
}

CsvTable read_csv(std::istream& in, char delimiter) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool any = false;
  std::size_t line = 1;

  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  char ch;
  while (in.get(ch)) {
    any = true;
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (ch == delimiter) {
      end_field();
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get(ch);
      end_record();
      ++line;
    } else if (ch == '\n') {
      end_record();
      ++line;
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::kParse, "unterminated quoted field at line " + std::to_string(line));
  if (field_started || !field.empty() || !record.empty()) end_record();
  if (!any || records.empty()) throw Error(ErrorCode::kParse, "empty file");

  CsvTable table;
  table.header = std::move(records.front());
  for (auto& h : table.header) h = trim(h);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw Error(ErrorCode::kParse, "row " + std::to_string(r) + ": expected " +
                                         std::to_string(table.header.size()) + " fields, found " +
                                         std::to_string(records[r].size()));
    }
    for (auto& cell : records[r]) cell = trim(cell);
    table.rows.push_back(std::move(records[r]));
  }
  if (table.rows.empty()) throw Error(ErrorCode::kParse, "file has a header but no data rows");
  return table;
}

Dataset make_dataset(const CsvTable& table, const TableSpec& spec, bool require_response) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < table.header.size(); ++c) index.emplace(table.header[c], c);
  auto column_of = [&](const ColumnSpec& c) -> std::optional<std::size_t> {
    const auto it = index.find(c.name);
    if (it == index.end()) return std::nullopt;
    return it->second;
  };

  Dataset data;
  data.row_count = table.rows.size();
  const ColumnSpec& response = spec.response();
  data.response_name = response.name;
  if (const auto col = column_of(response)) {
    data.response.reserve(data.row_count);
    for (std::size_t r = 0; r < data.row_count; ++r) {
      data.response.push_back(parse_number(table.rows[r][*col], response.name, r + 1));
    }
  } else if (require_response) {
    throw Error(ErrorCode::kMissingColumn, "response column '" + response.name + "' not found");
  }

  for (const auto& cs : spec.columns) {
    if (cs.role != Role::kNumeric && cs.role != Role::kCategorical) continue;
    const auto col = column_of(cs);
    if (!col) throw Error(ErrorCode::kMissingColumn, "column '" + cs.name + "' not found");
    FeatureColumn feature;
    feature.spec = cs;
    for (std::size_t r = 0; r < data.row_count; ++r) {
      const std::string& cell = table.rows[r][*col];
      if (cs.role == Role::kCategorical) {
        if (is_missing(cell)) {
          throw Error(ErrorCode::kParse,
                      "missing value in column '" + cs.name + "', row " + std::to_string(r + 1));
        }
        feature.labels.push_back(cell);
        continue;
      }
      const double value = parse_number(cell, cs.name, r + 1);
      if (cs.transform == ColumnTransform::kLog && !(value > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "log transform needs positive values: column '" + cs.name +
                                                     "', row " + std::to_string(r + 1) + " holds " + cell);
      }
      feature.values.push_back(value);
    }
    data.features.push_back(std::move(feature));
  }
  if (data.features.empty()) throw Error(ErrorCode::kInvalidArgument, "table spec selects no features");
  return data;
}

Dataset load_table(const std::filesystem::path& path, const TableSpec& spec, bool require_response) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return make_dataset(read_csv(in, spec.delimiter), spec, require_response);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.response_name = response_name;
  out.row_count = rows.size();
  for (const auto r : rows) {
    if (r >= row_count) throw Error(ErrorCode::kInvalidArgument, "subset row out of range");
  }
  if (!response.empty()) {
    out.response.reserve(rows.size());
    for (const auto r : rows) out.response.push_back(response[r]);
  }
  out.features.reserve(features.size());
  for (const auto& f : features) {
    FeatureColumn g;
    g.spec = f.spec;
    if (!f.values.empty()) {
      g.values.reserve(rows.size());
      for (const auto r : rows) g.values.push_back(f.values[r]);
    }
    if (!f.labels.empty()) {
      g.labels.reserve(rows.size());
      for (const auto r : rows) g.labels.push_back(f.labels[r]);
    }
    out.features.push_back(std::move(g));
  }
  return out;
}

}  // namespace vard::datakit
