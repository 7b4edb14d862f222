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

#ifndef KPITRIAGE_REPORT_HPP_
#define KPITRIAGE_REPORT_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "kpitriage/core.hpp"
#include "kpitriage/rules.hpp"
#include "kpitriage/table.hpp"
#include "kpitriage/triage.hpp"

namespace kpitriage {

// ---------------------------------------------------------------------------
// Query generation
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_plain_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

inline std::string sql_identifier(std::string_view s) {
  if (is_plain_identifier(s)) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string sql_string(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

inline std::string sql_condition(const Predicate& p) {
  std::string col = sql_identifier(p.attribute);
  if (p.is_equals()) return col + (p.polarity ? " = " : " <> ") + sql_string(p.category());
  return col + (p.polarity ? " > " : " <= ") + format_number(p.threshold());
}

}  // namespace detail

/// `SELECT * FROM <table> WHERE <scope AND correlated>`, conjuncts in
/// root-to-leaf order.
inline std::string generate_query(const Rule& rule, std::string_view table_name = "logs") {
  std::string sql = "SELECT * FROM " + detail::sql_identifier(table_name) + " WHERE ";
  bool first = true;
  auto add = [&](const Predicate& p) {
    if (!first) sql += " AND ";
    sql += detail::sql_condition(p);
    first = false;
  };
  for (const auto& p : rule.scope_predicates) add(p);
  add(rule.correlated_predicate);
  return sql;
}

/// Interpreter for the filter queries produced by generate_query:
///
///   SELECT * FROM <ident> WHERE <cond> (AND <cond>)*
///   cond := <ident> ('=' | '<>' | '>' | '>=' | '<' | '<=') (<string> | <number>)
///
/// Identifiers are bare or double-quoted; strings are single-quoted with ''
/// escapes. A NULL (missing) cell satisfies no condition.
class FilterQuery {
 public:
  struct Condition {
    std::string column;
    std::string op;
    std::variant<std::string, double> literal;
  };

  static FilterQuery parse(std::string_view sql) {
    FilterQuery q;
    Lexer lex{sql};
    lex.keyword("SELECT");
    lex.expect('*');
    lex.keyword("FROM");
    q.table_ = lex.identifier();
    lex.keyword("WHERE");
    do {
      Condition c;
      c.column = lex.identifier();
      c.op = lex.op();
      c.literal = lex.literal();
      q.conditions_.push_back(std::move(c));
    } while (lex.try_keyword("AND"));
    lex.end();
    return q;
  }

  const std::string& table() const { return table_; }
  const std::vector<Condition>& conditions() const { return conditions_; }

  std::vector<std::size_t> execute(const LogTable& table) const {
    std::vector<const Column*> cols;
    for (const auto& c : conditions_) cols.push_back(&table.column(c.column));
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < table.row_count(); ++r) {
      bool ok = true;
      for (std::size_t i = 0; i < conditions_.size() && ok; ++i) {
        ok = holds(conditions_[i], *cols[i], r);
      }
      if (ok) out.push_back(r);
    }
    return out;
  }

 private:
  static bool holds(const Condition& c, const Column& col, std::size_t row) {
    if (col.is_missing(row)) return false;
    if (const auto* s = std::get_if<std::string>(&c.literal)) {
      if (!col.is_categorical()) throw SchemaError("string comparison on numeric '" + c.column + "'");
      int cmp = std::string_view(col.category(row)).compare(*s);
      return compare(cmp, c.op);
    }
    if (!col.is_continuous()) throw SchemaError("numeric comparison on text '" + c.column + "'");
    double v = col.number(row), lit = std::get<double>(c.literal);
    return compare(v < lit ? -1 : (v > lit ? 1 : 0), c.op);
  }

  static bool compare(int cmp, const std::string& op) {
    if (op == "=") return cmp == 0;
    if (op == "<>") return cmp != 0;
    if (op == ">") return cmp > 0;
    if (op == ">=") return cmp >= 0;
    if (op == "<") return cmp < 0;
    return cmp <= 0;  // "<="
  }

  struct Lexer {
    std::string_view s;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
      throw ParseError("query: " + what + " at offset " + std::to_string(pos), 0);
    }
    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool try_keyword(std::string_view kw) {
      skip();
      if (s.size() - pos < kw.size()) return false;
      for (std::size_t i = 0; i < kw.size(); ++i) {
        if (std::toupper(static_cast<unsigned char>(s[pos + i])) != kw[i]) return false;
      }
      std::size_t after = pos + kw.size();
      if (after < s.size() && (std::isalnum(static_cast<unsigned char>(s[after])) || s[after] == '_')) {
        return false;
      }
      pos = after;
      return true;
    }
    void keyword(std::string_view kw) {
      if (!try_keyword(kw)) fail("expected " + std::string(kw));
    }
    void expect(char c) {
      skip();
      if (pos >= s.size() || s[pos] != c) fail(std::string("expected '") + c + "'");
      ++pos;
    }
    std::string identifier() {
      skip();
      if (pos < s.size() && s[pos] == '"') {
        ++pos;
        std::string out;
        for (;;) {
          if (pos >= s.size()) fail("unterminated identifier");
          char c = s[pos++];
          if (c == '"') {
            if (pos < s.size() && s[pos] == '"') {
              out += '"';
              ++pos;
              continue;
            }
            return out;
          }
          out += c;
        }
      }
      std::size_t start = pos;
      while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
      if (start == pos) fail("expected identifier");
      return std::string(s.substr(start, pos - start));
    }
    std::string op() {
      skip();
      for (std::string_view candidate : {"<>", "<=", ">=", "=", "<", ">"}) {
        if (s.substr(pos, candidate.size()) == candidate) {
          pos += candidate.size();
          return std::string(candidate);
        }
      }
      fail("expected comparison operator");
    }
    std::variant<std::string, double> literal() {
      skip();
      if (pos < s.size() && s[pos] == '\'') {
        ++pos;
        std::string out;
        for (;;) {
          if (pos >= s.size()) fail("unterminated string");
          char c = s[pos++];
          if (c == '\'') {
            if (pos < s.size() && s[pos] == '\'') {
              out += '\'';
              ++pos;
              continue;
            }
            return out;
          }
          out += c;
        }
      }
      std::size_t start = pos;
      while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
      auto v = parse_number(s.substr(start, pos - start));
      if (!v) fail("expected literal");
      return *v;
    }
    void end() {
      skip();
      if (pos < s.size() && s[pos] == ';') ++pos;
      skip();
      if (pos != s.size()) fail("trailing text");
    }
  };

  std::string table_;
  std::vector<Condition> conditions_;
};

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class ReportFormat { Json, Markdown };

struct Report {
  Date run_date;
  std::string kpi;
  std::string table_name = "logs";
  std::vector<TriagedRule> rules;
  std::vector<std::string> resolved;
};

/// Rules ordered by correlation score, highest first; ties by key.
inline std::vector<TriagedRule> ranked(std::vector<TriagedRule> rules) {
  std::stable_sort(rules.begin(), rules.end(), [](const TriagedRule& a, const TriagedRule& b) {
    if (a.rule.correlation_score != b.rule.correlation_score) {
      return a.rule.correlation_score > b.rule.correlation_score;
    }
    return a.rule.key() < b.rule.key();
  });
  return rules;
}

inline nlohmann::ordered_json to_json(const Report& report) {
  nlohmann::ordered_json doc;
  doc["run_date"] = report.run_date.to_string();
  doc["kpi"] = report.kpi;
  doc["rules"] = nlohmann::ordered_json::array();
  std::size_t rank = 0;
  for (const auto& t : ranked(report.rules)) {
    const Rule& r = t.rule;
    nlohmann::ordered_json e;
    e["rank"] = ++rank;
    e["key"] = r.key();
    e["correlated_predicate"] = display(r.correlated_predicate);
    e["scope_predicates"] = nlohmann::ordered_json::array();
    for (const auto& p : r.scope_predicates) e["scope_predicates"].push_back(display(p));
    e["request_count"] = r.request_count;
    if (r.full_request_count) {
      e["full_request_count"] = *r.full_request_count;
    } else {
      e["full_request_count"] = nullptr;
    }
    if (r.performance_impact) {
      e["performance_impact"] = *r.performance_impact;
    } else {
      e["performance_impact"] = nullptr;
    }
    e["correlation_score"] = r.correlation_score;
    e["triage"] = std::string(to_string(t.category));
    e["query"] = generate_query(r, report.table_name);
    doc["rules"].push_back(std::move(e));
  }
  doc["resolved"] = report.resolved;
  return doc;
}

inline std::string render(const Report& report, ReportFormat format) {
  if (format == ReportFormat::Json) return to_json(report).dump(2) + "\n";
  auto cell = [](std::string s) {
    std::string out;
    for (char c : s) {
      if (c == '|') out += '\\';
      out += c == '\n' ? ' ' : c;
    }
    return out;
  };
  std::ostringstream md;
  md << "# KPI diagnosis: " << report.kpi << ", " << report.run_date.to_string() << "\n\n";
  auto rules = ranked(report.rules);
  if (rules.empty()) {
    md << "No rules were extracted.\n";
  } else {
    md << "| Rank | Triage | Correlated predicate | Scope | Requests | Impact | Score | Query |\n";
    md << "|---:|---|---|---|---:|---:|---:|---|\n";
    std::size_t rank = 0;
    for (const auto& t : rules) {
      const Rule& r = t.rule;
      std::string scope = scope_text(r);
      md << "| " << ++rank << " | " << to_string(t.category) << " | "
         << cell(display(r.correlated_predicate)) << " | " << cell(scope.empty() ? "-" : scope)
         << " | " << r.request_count << " | "
         << (r.performance_impact ? format_number(*r.performance_impact) : std::string("stale"))
         << " | " << format_number(r.correlation_score) << " | `"
         << cell(generate_query(r, report.table_name)) << "` |\n";
    }
  }
  md << "\n## Resolved\n\n";
  if (report.resolved.empty()) {
    md << "None.\n";
  } else {
    for (const auto& k : report.resolved) md << "- " << cell(k) << "\n";
  }
  return md.str();
}

/// True when any rule is New or Regressed.
inline bool needs_attention(const Report& report) {
  return std::any_of(report.rules.begin(), report.rules.end(), [](const TriagedRule& t) {
    return t.category == TriageCategory::New || t.category == TriageCategory::Regressed;
  });
}

// ---------------------------------------------------------------------------
// Precision against a ground-truth manifest
// ---------------------------------------------------------------------------

struct PrecisionResult {
  std::optional<double> precision;  // nullopt for an empty report
  std::size_t valid_issue_count = 0;
  std::vector<std::string> true_positives;
  std::vector<std::string> false_positives;
  std::vector<std::string> missed;  // truth keys never reported; recall is not scored
};

inline PrecisionResult precision(const std::vector<std::string>& reported_keys,
                                 const std::vector<std::string>& truth_keys) {
  std::set<std::string> reported(reported_keys.begin(), reported_keys.end());
  std::set<std::string> truth(truth_keys.begin(), truth_keys.end());
  PrecisionResult res;
  for (const auto& k : reported) {
    (truth.contains(k) ? res.true_positives : res.false_positives).push_back(k);
  }
  for (const auto& k : truth) {
    if (!reported.contains(k)) res.missed.push_back(k);
  }
  res.valid_issue_count = res.true_positives.size();
  if (!reported.empty()) {
    res.precision = static_cast<double>(res.true_positives.size()) /
                    static_cast<double>(res.true_positives.size() + res.false_positives.size());
  }
  return res;
}

}  // namespace kpitriage

#endif  // KPITRIAGE_REPORT_HPP_
