// Copyright 2026 The kpitriage Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Loading structured logs (CSV or JSON lines) into a LogTable.
//
// Declared column kinds in the schema config are authoritative. Columns the
// config does not mention are inferred: all-numeric cells make a continuous
// column, anything else a categorical one. Empty cells become Missing.

#ifndef KPITRIAGE_INGEST_HPP_
#define KPITRIAGE_INGEST_HPP_

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "kpitriage/core.hpp"
#include "kpitriage/table.hpp"

namespace kpitriage {

enum class InputFormat { Csv, Jsonl };

inline InputFormat parse_input_format(std::string_view s) {
  if (s == "csv") return InputFormat::Csv;
  if (s == "jsonl" || s == "ndjson") return InputFormat::Jsonl;
  throw ConfigError("unknown input format '" + std::string(s) + "'");
}

/// Picks the format from the file extension; CSV when unsure.
inline InputFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".ndjson" || ext == ".json") ? InputFormat::Jsonl
                                                                  : InputFormat::Csv;
}

struct ColumnDecl {
  std::optional<ColumnKind> kind;
  std::optional<ColumnRole> role;
};

/// Column declarations plus the KPI and its SLO. Parsed from the "columns"
/// and "kpi" members of a JSON config document:
///
///   "columns": {"Region": {"kind": "categorical"}, "RequestId": {"role": "excluded"}},
///   "kpi": {"column": "Latency", "kind": "continuous", "threshold": 5, "direction": "above"}
///   "kpi": {"column": "Status", "kind": "binary", "positive": "fail"}
struct SchemaConfig {
  std::map<std::string, ColumnDecl> columns;
  KpiSpec kpi;

  static SchemaConfig from_json(const nlohmann::json& doc) {
    SchemaConfig cfg;
    if (doc.contains("columns")) {
      const auto& cols = doc.at("columns");
      if (!cols.is_object()) throw ConfigError("'columns' must be an object");
      for (const auto& [name, decl] : cols.items()) {
        ColumnDecl d;
        if (decl.contains("kind")) {
          auto k = decl.at("kind").get<std::string>();
          if (k == "categorical") {
            d.kind = ColumnKind::Categorical;
          } else if (k == "continuous") {
            d.kind = ColumnKind::Continuous;
          } else {
            throw ConfigError("column '" + name + "': unknown kind '" + k + "'");
          }
        }
        if (decl.contains("role")) {
          auto r = decl.at("role").get<std::string>();
          if (r == "feature") {
            d.role = ColumnRole::Feature;
          } else if (r == "excluded") {
            d.role = ColumnRole::Excluded;
          } else if (r == "kpi") {
            d.role = ColumnRole::Kpi;
          } else {
            throw ConfigError("column '" + name + "': unknown role '" + r + "'");
          }
        }
        cfg.columns.emplace(name, d);
      }
    }
    if (!doc.contains("kpi") || !doc.at("kpi").is_object()) {
      throw ConfigError("config has no 'kpi' section");
    }
    const auto& k = doc.at("kpi");
    if (!k.contains("column")) throw ConfigError("kpi.column is required");
    cfg.kpi.column = k.at("column").get<std::string>();
    auto kind = k.value("kind", std::string("continuous"));
    if (kind == "continuous") {
      cfg.kpi.kind = KpiKind::Continuous;
      if (!k.contains("threshold")) throw ConfigError("kpi.threshold is required");
      cfg.kpi.threshold = k.at("threshold").get<double>();
      auto dir = k.value("direction", std::string("above"));
      if (dir == "above") {
        cfg.kpi.direction = SloDirection::Above;
      } else if (dir == "below") {
        cfg.kpi.direction = SloDirection::Below;
      } else {
        throw ConfigError("kpi.direction must be 'above' or 'below'");
      }
    } else if (kind == "binary") {
      cfg.kpi.kind = KpiKind::Binary;
      if (!k.contains("positive")) throw ConfigError("kpi.positive is required for binary KPIs");
      cfg.kpi.positive_label = k.at("positive").get<std::string>();
    } else {
      throw ConfigError("kpi.kind must be 'continuous' or 'binary'");
    }
    for (const auto& [name, decl] : cfg.columns) {
      if (decl.role == ColumnRole::Kpi && name != cfg.kpi.column) {
        throw ConfigError("column '" + name + "' has role kpi but the KPI is '" +
                          cfg.kpi.column + "'");
      }
    }
    return cfg;
  }
};

namespace detail {

/// Accumulates one column while rows stream in.
class ColumnBuilder {
 public:
  ColumnBuilder(std::string name, std::optional<ColumnKind> declared, ColumnRole role)
      : name_(std::move(name)),
        declared_(declared),
        role_(role),
        column_(name_, declared.value_or(ColumnKind::Categorical), role) {}

  const std::string& name() const { return name_; }
  std::size_t size() const { return column_.size(); }

  void push_missing() { column_.push_missing(); }

  void push_text(std::string_view cell, std::size_t line) {
    if (cell.empty()) {
      column_.push_missing();
      return;
    }
    if (column_.is_continuous()) {
      auto v = parse_number(cell);
      if (!v) {
        throw ParseError("column '" + name_ + "': '" + std::string(cell) + "' is not a number",
                         line);
      }
      column_.push_number(*v);
    } else {
      column_.push_category(cell);
    }
  }

  void push_number(double v, std::string_view text) {
    if (column_.is_continuous()) {
      column_.push_number(v);
    } else {
      column_.push_category(text);
    }
  }

  Column finish() && {
    if (declared_ || column_.dictionary().empty()) return std::move(column_);
    std::vector<double> mapped;
    mapped.reserve(column_.dictionary().size());
    for (const auto& text : column_.dictionary()) {
      auto v = parse_number(text);
      if (!v) return std::move(column_);
      mapped.push_back(*v);
    }
    Column out(name_, ColumnKind::Continuous, role_);
    out.reserve(column_.size());
    for (std::uint32_t c : column_.codes()) {
      if (c == Column::kMissingCode) {
        out.push_missing();
      } else {
        out.push_number(mapped[c]);
      }
    }
    return out;
  }

 private:
  std::string name_;
  std::optional<ColumnKind> declared_;
  ColumnRole role_;
  Column column_;
};

inline ColumnBuilder make_builder(const std::string& name, const SchemaConfig& cfg) {
  std::optional<ColumnKind> kind;
  ColumnRole role = ColumnRole::Feature;
  if (auto it = cfg.columns.find(name); it != cfg.columns.end()) {
    kind = it->second.kind;
    if (it->second.role) role = *it->second.role;
  }
  if (name == cfg.kpi.column) {
    ColumnKind kpi_kind =
        cfg.kpi.kind == KpiKind::Continuous ? ColumnKind::Continuous : ColumnKind::Categorical;
    if (kind && *kind != kpi_kind) {
      throw ConfigError("KPI column '" + name + "' declared with a kind that contradicts the KPI");
    }
    kind = kpi_kind;
    role = ColumnRole::Kpi;
  }
  return ColumnBuilder(name, kind, role);
}

inline LogTable finish_table(std::vector<ColumnBuilder>& builders, const SchemaConfig& cfg) {
  LogTable table;
  bool has_kpi = false;
  for (auto& b : builders) {
    if (b.name() == cfg.kpi.column) has_kpi = true;
    table.add_column(std::move(b).finish());
  }
  if (!has_kpi) throw ConfigError("KPI column '" + cfg.kpi.column + "' is absent from the input");
  return table;
}

/// RFC-4180 record splitter over an in-memory buffer.
class CsvReader {
 public:
  explicit CsvReader(std::string_view text) : text_(text) {
    if (text_.starts_with("\xEF\xBB\xBF")) pos_ = 3;
  }

  /// Next record, or false at end of input. `line` is the first line of the
  /// record (1-based).
  bool next(std::vector<std::string>& fields, std::size_t& line) {
    fields.clear();
    if (pos_ >= text_.size()) return false;
    line = line_;
    std::string field;
    bool quoted = false;
    bool field_was_quoted = false;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (quoted) {
        if (c == '"') {
          if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '"') {
            field.push_back('"');
            pos_ += 2;
            continue;
          }
          quoted = false;
          ++pos_;
          continue;
        }
        if (c == '\n') ++line_;
        field.push_back(c);
        ++pos_;
        continue;
      }
      if (c == '"') {
        if (!field.empty() || field_was_quoted) {
          throw ParseError("unexpected quote inside unquoted field", line_);
        }
        quoted = true;
        field_was_quoted = true;
        ++pos_;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
        ++pos_;
      } else if (c == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') {
        pos_ += 2;
        ++line_;
        fields.push_back(std::move(field));
        return true;
      } else if (c == '\n') {
        ++pos_;
        ++line_;
        fields.push_back(std::move(field));
        return true;
      } else {
        if (field_was_quoted) throw ParseError("text after closing quote", line_);
        field.push_back(c);
        ++pos_;
      }
    }
    if (quoted) throw ParseError("unterminated quoted field", line);
    fields.push_back(std::move(field));
    return true;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

}  // namespace detail

inline LogTable load_csv_text(std::string_view text, const SchemaConfig& cfg) {
  detail::CsvReader reader(text);
  std::vector<std::string> fields;
  std::size_t line = 0;
  if (!reader.next(fields, line)) throw ParseError("empty CSV input: no header row", 1);
  std::vector<detail::ColumnBuilder> builders;
  builders.reserve(fields.size());
  for (const auto& name : fields) {
    for (const auto& b : builders) {
      if (b.name() == name) throw ParseError("duplicate header '" + name + "'", line);
    }
    builders.push_back(detail::make_builder(name, cfg));
  }
  while (reader.next(fields, line)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != builders.size()) {
      throw ParseError("expected " + std::to_string(builders.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line);
    }
    for (std::size_t i = 0; i < fields.size(); ++i) builders[i].push_text(fields[i], line);
  }
  return detail::finish_table(builders, cfg);
}

inline LogTable load_jsonl_text(std::string_view text, const SchemaConfig& cfg) {
  std::vector<detail::ColumnBuilder> builders;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t rows = 0;
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (raw.find_first_not_of(" \t") == std::string_view::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line);
    }
    if (!record.is_object()) throw ParseError("record is not a JSON object", line);
    for (const auto& [key, value] : record.items()) {
      auto [it, inserted] = index.try_emplace(key, builders.size());
      if (inserted) {
        builders.push_back(detail::make_builder(key, cfg));
        for (std::size_t r = 0; r < rows; ++r) builders.back().push_missing();
      }
      auto& b = builders[it->second];
      if (value.is_null()) {
        b.push_missing();
      } else if (value.is_string()) {
        b.push_text(value.get_ref<const std::string&>(), line);
      } else if (value.is_number()) {
        b.push_number(value.get<double>(), value.dump());
      } else if (value.is_boolean()) {
        b.push_text(value.get<bool>() ? "true" : "false", line);
      } else {
        throw ParseError("field '" + key + "' is not a flat value", line);
      }
    }
    ++rows;
    for (auto& b : builders) {
      if (b.size() < rows) b.push_missing();
    }
  }
  for (const auto& [name, decl] : cfg.columns) {
    (void)decl;
    if (!index.contains(name) && name != cfg.kpi.column) {
      index.emplace(name, builders.size());
      builders.push_back(detail::make_builder(name, cfg));
      for (std::size_t r = 0; r < rows; ++r) builders.back().push_missing();
    }
  }
  return detail::finish_table(builders, cfg);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline LogTable load(const std::filesystem::path& path, InputFormat format,
                     const SchemaConfig& cfg) {
  std::string text = read_file(path);
  return format == InputFormat::Csv ? load_csv_text(text, cfg) : load_jsonl_text(text, cfg);
}

/// Exact distinct-value count per categorical column, Missing excluded.
inline std::map<std::string, std::size_t> measure_cardinality(const LogTable& table) {
  std::map<std::string, std::size_t> out;
  for (const auto& c : table.columns()) {
    if (c.is_categorical()) out.emplace(c.name(), c.distinct_count());
  }
  return out;
}

namespace detail {

inline void append_csv_field(std::string& out, std::string_view field) {
  bool quote = field.find_first_of(",\"\r\n") != std::string_view::npos ||
               (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!quote) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

}  // namespace detail

/// RFC 4180 text with a header row; missing cells are empty fields.
inline std::string to_csv(const LogTable& table) {
  std::string out;
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    if (c) out += ',';
    detail::append_csv_field(out, table.column(c).name());
  }
  out += '\n';
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    for (std::size_t c = 0; c < table.column_count(); ++c) {
      if (c) out += ',';
      const Column& col = table.column(c);
      if (col.is_missing(r)) continue;
      if (col.is_categorical()) {
        detail::append_csv_field(out, col.category(r));
      } else {
        out += format_number(col.number(r));
      }
    }
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace kpitriage

#endif  // KPITRIAGE_INGEST_HPP_
