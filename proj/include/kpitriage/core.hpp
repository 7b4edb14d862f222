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

// Shared domain types: column specs, predicates, rules, triage categories,
// dates and the error hierarchy used throughout the library.

#ifndef KPITRIAGE_CORE_HPP_
#define KPITRIAGE_CORE_HPP_

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

namespace kpitriage {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration is missing or inconsistent (e.g. no KPI column).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A referenced attribute does not exist or has the wrong kind.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Input text could not be parsed. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input data cannot support the requested analysis.
class DataError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

enum class ColumnKind { Categorical, Continuous };
enum class ColumnRole { Feature, Kpi, Excluded };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Categorical;
  ColumnRole role = ColumnRole::Feature;
  std::size_t observed_cardinality = 0;  // categorical only

  bool operator==(const ColumnSpec&) const = default;
};

inline std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::Categorical ? "categorical" : "continuous";
}

inline std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::Feature: return "feature";
    case ColumnRole::Kpi: return "kpi";
    case ColumnRole::Excluded: return "excluded";
  }
  return "feature";
}

/// Placeholder category that replaces missing categorical cells.
inline constexpr std::string_view kEmptyCategory = "<EMPTY>";

struct Missing {
  bool operator==(const Missing&) const = default;
};

/// A single cell: categorical text, continuous number, or missing.
using Value = std::variant<Missing, std::string, double>;

inline bool is_missing(const Value& v) { return std::holds_alternative<Missing>(v); }

// ---------------------------------------------------------------------------
// Numbers
// ---------------------------------------------------------------------------

/// Shortest text that parses back to exactly `v`.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Parses a finite double, ignoring surrounding blanks. Returns nullopt on
/// anything else (including "nan" and "inf").
inline std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double out = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(out)) {
    return std::nullopt;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Predicates
// ---------------------------------------------------------------------------

struct Equals {
  std::string category;
  bool operator==(const Equals&) const = default;
};

struct GreaterThan {
  double threshold = 0.0;
  bool operator==(const GreaterThan&) const = default;
};

/// Boolean test on a single attribute. With polarity false the outcome of
/// the test is negated, so GreaterThan{t} with polarity false reads `<= t`.
struct Predicate {
  std::string attribute;
  std::variant<Equals, GreaterThan> test;
  bool polarity = true;

  static Predicate equals(std::string attribute, std::string category, bool polarity = true) {
    return Predicate{std::move(attribute), Equals{std::move(category)}, polarity};
  }
  static Predicate greater_than(std::string attribute, double threshold, bool polarity = true) {
    return Predicate{std::move(attribute), GreaterThan{threshold}, polarity};
  }

  bool is_equals() const { return std::holds_alternative<Equals>(test); }
  bool is_greater_than() const { return std::holds_alternative<GreaterThan>(test); }
  const std::string& category() const { return std::get<Equals>(test).category; }
  double threshold() const { return std::get<GreaterThan>(test).threshold; }

  bool operator==(const Predicate&) const = default;
};

inline Predicate flip_polarity(Predicate p) {
  p.polarity = !p.polarity;
  return p;
}

/// Identity used to match predicates across runs. Continuous thresholds are
/// dropped so that split points drifting between days map to one key.
inline std::string canonical_key(const Predicate& p) {
  if (p.is_equals()) {
    return p.attribute + (p.polarity ? "=" : "!=") + p.category();
  }
  return p.attribute + (p.polarity ? ">" : "<=");
}

/// Report text form: `Attr:Value`, `Attr > 568.5`.
inline std::string display(const Predicate& p) {
  if (p.is_equals()) {
    std::string s = p.attribute + ":" + p.category();
    return p.polarity ? s : "NOT " + s;
  }
  return p.attribute + (p.polarity ? " > " : " <= ") + format_number(p.threshold());
}

/// Outcome of the raw test before polarity is applied. Missing cells never
/// satisfy a test.
inline bool raw_test(const Predicate& p, const Value& v) {
  if (p.is_equals()) {
    const auto* s = std::get_if<std::string>(&v);
    return s != nullptr && *s == p.category();
  }
  const auto* d = std::get_if<double>(&v);
  return d != nullptr && *d > p.threshold();
}

inline bool evaluate(const Predicate& p, const Value& v) { return raw_test(p, v) == p.polarity; }

// ---------------------------------------------------------------------------
// KPI
// ---------------------------------------------------------------------------

enum class KpiKind { Continuous, Binary };
enum class SloDirection { Above, Below };  // which side of the threshold violates

/// Stratification criterion. For continuous KPIs a row is positive when the
/// value lies strictly beyond `threshold` in `direction`; for binary KPIs a
/// row is positive when the category equals `positive_label`.
struct KpiSpec {
  std::string column;
  KpiKind kind = KpiKind::Continuous;
  double threshold = 0.0;
  SloDirection direction = SloDirection::Above;
  std::string positive_label;

  bool is_positive(double value) const {
    return direction == SloDirection::Above ? value > threshold : value < threshold;
  }
  bool is_positive(std::string_view label) const { return label == positive_label; }
};

// ---------------------------------------------------------------------------
// Dates
// ---------------------------------------------------------------------------

class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days days) : days_(days) {}
  Date(int year, unsigned month, unsigned day)
      : days_(std::chrono::sys_days(std::chrono::year_month_day{
            std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}})) {}

  static Date parse(std::string_view text) {
    auto fail = [&] { return ParseError("invalid date '" + std::string(text) + "'", 0); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw fail();
    auto field = [&](std::size_t pos, std::size_t len) {
      int v = 0;
      auto res = std::from_chars(text.data() + pos, text.data() + pos + len, v);
      if (res.ec != std::errc() || res.ptr != text.data() + pos + len) throw fail();
      return v;
    };
    std::chrono::year_month_day ymd{std::chrono::year{field(0, 4)},
                                    std::chrono::month{static_cast<unsigned>(field(5, 2))},
                                    std::chrono::day{static_cast<unsigned>(field(8, 2))}};
    if (!ymd.ok()) throw fail();
    return Date(std::chrono::sys_days(ymd));
  }

  std::string to_string() const {
    std::chrono::year_month_day ymd{days_};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
  }

  Date plus_days(int n) const { return Date(days_ + std::chrono::days{n}); }
  int days_since(const Date& other) const { return (days_ - other.days_).count(); }

  auto operator<=>(const Date&) const = default;

 private:
  std::chrono::sys_days days_{};
};

// ---------------------------------------------------------------------------
// Rules and triage
// ---------------------------------------------------------------------------

/// A correlated predicate localized by the conjunction of its scope
/// predicates (root first).
struct Rule {
  Predicate correlated_predicate;
  std::vector<Predicate> scope_predicates;
  double correlation_score = 0.0;
  std::size_t request_count = 0;            // sampled data
  std::optional<double> performance_impact;  // nullopt: no full-data match
  std::optional<std::size_t> full_request_count;
  Date as_of;

  std::string key() const { return canonical_key(correlated_predicate); }
  bool operator==(const Rule&) const = default;
};

enum class TriageCategory { New, Regressed, Known, Improved, Resolved };

inline std::string_view to_string(TriageCategory c) {
  switch (c) {
    case TriageCategory::New: return "new";
    case TriageCategory::Regressed: return "regressed";
    case TriageCategory::Known: return "known";
    case TriageCategory::Improved: return "improved";
    case TriageCategory::Resolved: return "resolved";
  }
  return "new";
}

inline std::optional<TriageCategory> parse_triage_category(std::string_view s) {
  if (s == "new") return TriageCategory::New;
  if (s == "regressed") return TriageCategory::Regressed;
  if (s == "known" || s == "existing") return TriageCategory::Known;
  if (s == "improved") return TriageCategory::Improved;
  if (s == "resolved") return TriageCategory::Resolved;
  return std::nullopt;
}

}  // namespace kpitriage

#endif  // KPITRIAGE_CORE_HPP_
