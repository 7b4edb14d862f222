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

#ifndef KPITRIAGE_TABLE_HPP_
#define KPITRIAGE_TABLE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kpitriage/core.hpp"

namespace kpitriage {

/// One typed column. Categorical cells are dictionary encoded; continuous
/// cells are stored as doubles with NaN marking a missing cell.
class Column {
 public:
  static constexpr std::uint32_t kMissingCode = std::numeric_limits<std::uint32_t>::max();

  Column() = default;
  Column(std::string name, ColumnKind kind, ColumnRole role = ColumnRole::Feature)
      : spec_{std::move(name), kind, role, 0} {}

  const ColumnSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }
  ColumnKind kind() const { return spec_.kind; }
  ColumnRole role() const { return spec_.role; }
  void set_role(ColumnRole role) { spec_.role = role; }

  bool is_categorical() const { return spec_.kind == ColumnKind::Categorical; }
  bool is_continuous() const { return spec_.kind == ColumnKind::Continuous; }

  std::size_t size() const { return is_categorical() ? codes_.size() : numbers_.size(); }

  bool is_missing(std::size_t row) const {
    return is_categorical() ? codes_[row] == kMissingCode : std::isnan(numbers_[row]);
  }

  // Categorical access ------------------------------------------------------

  std::uint32_t code(std::size_t row) const { return codes_[row]; }
  std::span<const std::uint32_t> codes() const { return codes_; }
  const std::vector<std::string>& dictionary() const { return dictionary_; }
  std::string_view category(std::size_t row) const { return dictionary_[codes_[row]]; }

  /// Code for `category`, or kMissingCode when it never occurs.
  std::uint32_t find_code(std::string_view category) const {
    auto it = index_.find(std::string(category));
    return it == index_.end() ? kMissingCode : it->second;
  }

  void push_category(std::string_view category) { codes_.push_back(intern(category)); }
  void push_code(std::uint32_t code) { codes_.push_back(code); }

  std::uint32_t intern(std::string_view category) {
    auto [it, inserted] =
        index_.try_emplace(std::string(category), static_cast<std::uint32_t>(dictionary_.size()));
    if (inserted) dictionary_.emplace_back(category);
    return it->second;
  }

  // Continuous access -------------------------------------------------------

  double number(std::size_t row) const { return numbers_[row]; }
  std::span<const double> numbers() const { return numbers_; }
  void push_number(double v) { numbers_.push_back(v); }

  void push_missing() {
    if (is_categorical()) {
      codes_.push_back(kMissingCode);
    } else {
      numbers_.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }

  Value value(std::size_t row) const {
    if (is_missing(row)) return Missing{};
    if (is_categorical()) return std::string(category(row));
    return numbers_[row];
  }

  void push(const Value& v) {
    if (kpitriage::is_missing(v)) {
      push_missing();
    } else if (is_categorical()) {
      const auto* s = std::get_if<std::string>(&v);
      if (s == nullptr) throw SchemaError("column '" + name() + "' is categorical");
      push_category(*s);
    } else {
      const auto* d = std::get_if<double>(&v);
      if (d == nullptr) throw SchemaError("column '" + name() + "' is continuous");
      push_number(*d);
    }
  }

  void reserve(std::size_t n) {
    if (is_categorical()) {
      codes_.reserve(n);
    } else {
      numbers_.reserve(n);
    }
  }

  /// Copy of the listed rows, in the given order.
  Column gather(std::span<const std::size_t> rows) const {
    Column out(spec_.name, spec_.kind, spec_.role);
    out.reserve(rows.size());
    if (is_categorical()) {
      std::vector<std::uint32_t> remap(dictionary_.size(), kMissingCode);
      for (std::size_t r : rows) {
        std::uint32_t c = codes_[r];
        if (c == kMissingCode) {
          out.codes_.push_back(kMissingCode);
          continue;
        }
        if (remap[c] == kMissingCode) remap[c] = out.intern(dictionary_[c]);
        out.codes_.push_back(remap[c]);
      }
    } else {
      for (std::size_t r : rows) out.numbers_.push_back(numbers_[r]);
    }
    return out;
  }

  /// Distinct non-missing values present in the column.
  std::size_t distinct_count() const {
    if (is_categorical()) {
      std::vector<bool> seen(dictionary_.size(), false);
      std::size_t n = 0;
      for (std::uint32_t c : codes_) {
        if (c != kMissingCode && !seen[c]) {
          seen[c] = true;
          ++n;
        }
      }
      return n;
    }
    std::vector<double> v;
    v.reserve(numbers_.size());
    for (double d : numbers_) {
      if (!std::isnan(d)) v.push_back(d);
    }
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
  }

  bool operator==(const Column& other) const {
    if (spec_.name != other.spec_.name || spec_.kind != other.spec_.kind ||
        spec_.role != other.spec_.role || size() != other.size()) {
      return false;
    }
    for (std::size_t r = 0; r < size(); ++r) {
      if (is_categorical()) {
        if (is_missing(r) != other.is_missing(r)) return false;
        if (!is_missing(r) && category(r) != other.category(r)) return false;
      } else {
        double a = numbers_[r], b = other.numbers_[r];
        if (std::isnan(a) != std::isnan(b)) return false;
        if (!std::isnan(a) && a != b) return false;
      }
    }
    return true;
  }

 private:
  ColumnSpec spec_;
  std::vector<std::uint32_t> codes_;
  std::vector<std::string> dictionary_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<double> numbers_;
};

/// In-memory columnar table. All columns have the same length.
class LogTable {
 public:
  LogTable() = default;

  std::size_t row_count() const { return row_count_; }
  std::size_t column_count() const { return columns_.size(); }

  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t i) const { return columns_[i]; }

  bool has_column(std::string_view name) const { return index_.contains(std::string(name)); }

  const Column& column(std::string_view name) const { return columns_[column_index(name)]; }
  Column& mutable_column(std::string_view name) { return columns_[column_index(name)]; }

  std::size_t column_index(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw SchemaError("unknown attribute '" + std::string(name) + "'");
    return it->second;
  }

  /// Schema with observed cardinalities filled in for categorical columns.
  std::vector<ColumnSpec> schema() const {
    std::vector<ColumnSpec> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) {
      ColumnSpec s = c.spec();
      s.observed_cardinality = c.is_categorical() ? c.distinct_count() : 0;
      out.push_back(std::move(s));
    }
    return out;
  }

  /// Adds a column; the first column fixes row_count.
  void add_column(Column column) {
    if (index_.contains(column.name())) {
      throw SchemaError("duplicate column '" + column.name() + "'");
    }
    if (columns_.empty()) {
      row_count_ = column.size();
    } else if (column.size() != row_count_) {
      throw SchemaError("column '" + column.name() + "' has " + std::to_string(column.size()) +
                        " rows, expected " + std::to_string(row_count_));
    }
    index_.emplace(column.name(), columns_.size());
    columns_.push_back(std::move(column));
  }

  Value value(std::size_t row, std::string_view attribute) const {
    return column(attribute).value(row);
  }

  LogTable gather(std::span<const std::size_t> rows) const {
    LogTable out;
    for (const auto& c : columns_) out.add_column(c.gather(rows));
    if (columns_.empty()) out.row_count_ = 0;
    return out;
  }

  std::vector<std::string> feature_names() const {
    std::vector<std::string> out;
    for (const auto& c : columns_) {
      if (c.role() == ColumnRole::Feature) out.push_back(c.name());
    }
    return out;
  }

  bool operator==(const LogTable& other) const {
    return row_count_ == other.row_count_ && columns_ == other.columns_;
  }

 private:
  std::vector<Column> columns_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t row_count_ = 0;
};

/// Evaluates `p` against one table row. Throws SchemaError when the
/// attribute is absent or its kind does not match the test.
inline bool evaluate(const Predicate& p, const LogTable& table, std::size_t row) {
  const Column& col = table.column(p.attribute);
  bool raw = false;
  if (p.is_equals()) {
    if (!col.is_categorical()) {
      throw SchemaError("equality test on continuous attribute '" + p.attribute + "'");
    }
    raw = !col.is_missing(row) && col.category(row) == p.category();
  } else {
    if (!col.is_continuous()) {
      throw SchemaError("threshold test on categorical attribute '" + p.attribute + "'");
    }
    double v = col.number(row);
    raw = !std::isnan(v) && v > p.threshold();
  }
  return raw == p.polarity;
}

/// A predicate resolved against one table: column lookup and category
/// interning happen once.
class BoundPredicate {
 public:
  BoundPredicate(const Predicate& p, const LogTable& table)
      : column_(&table.column(p.attribute)), polarity_(p.polarity) {
    if (p.is_equals()) {
      if (!column_->is_categorical()) {
        throw SchemaError("equality test on continuous attribute '" + p.attribute + "'");
      }
      code_ = column_->find_code(p.category());
    } else {
      if (!column_->is_continuous()) {
        throw SchemaError("threshold test on categorical attribute '" + p.attribute + "'");
      }
      is_threshold_ = true;
      threshold_ = p.threshold();
    }
  }

  bool operator()(std::size_t row) const {
    bool raw;
    if (is_threshold_) {
      double v = column_->number(row);
      raw = !std::isnan(v) && v > threshold_;
    } else {
      raw = code_ != Column::kMissingCode && column_->code(row) == code_;
    }
    return raw == polarity_;
  }

 private:
  const Column* column_;
  bool polarity_;
  bool is_threshold_ = false;
  std::uint32_t code_ = Column::kMissingCode;
  double threshold_ = 0.0;
};

/// Rows satisfying every predicate in `conjunction`.
inline std::vector<std::size_t> matching_rows(const LogTable& table,
                                              std::span<const Predicate> conjunction) {
  std::vector<BoundPredicate> bound;
  bound.reserve(conjunction.size());
  for (const auto& p : conjunction) bound.emplace_back(p, table);
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    bool ok = true;
    for (const auto& b : bound) {
      if (!b(r)) {
        ok = false;
        break;
      }
    }
    if (ok) rows.push_back(r);
  }
  return rows;
}

}  // namespace kpitriage

#endif  // KPITRIAGE_TABLE_HPP_
