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

#ifndef KPITRIAGE_PREP_HPP_
#define KPITRIAGE_PREP_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "kpitriage/core.hpp"
#include "kpitriage/table.hpp"

namespace kpitriage {

inline constexpr std::size_t kDefaultMaxCardinality = 10'000;
inline constexpr std::size_t kDefaultSampleRows = 1'000'000;

// Median of the values, 0 for an empty input. Reorders `values`.
inline double median(std::vector<double>& values) {
  if (values.empty()) return 0.0;
  std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return lower + (upper - lower) / 2.0;
}

/// Replaces missing cells: "<EMPTY>" for categorical columns, the column
/// median for continuous ones.
inline LogTable impute(const LogTable& table) {
  LogTable out;
  for (const auto& col : table.columns()) {
    Column filled(col.name(), col.kind(), col.role());
    filled.reserve(col.size());
    if (col.is_categorical()) {
      std::uint32_t empty_code = Column::kMissingCode;
      std::vector<std::uint32_t> remap(col.dictionary().size(), Column::kMissingCode);
      for (std::size_t r = 0; r < col.size(); ++r) {
        std::uint32_t c = col.code(r);
        if (c == Column::kMissingCode) {
          if (empty_code == Column::kMissingCode) empty_code = filled.intern(kEmptyCategory);
          filled.push_code(empty_code);
        } else {
          if (remap[c] == Column::kMissingCode) remap[c] = filled.intern(col.dictionary()[c]);
          filled.push_code(remap[c]);
        }
      }
    } else {
      std::vector<double> present;
      present.reserve(col.size());
      for (double v : col.numbers()) {
        if (!std::isnan(v)) present.push_back(v);
      }
      double fill = present.size() == col.size() ? 0.0 : median(present);
      for (double v : col.numbers()) filled.push_number(std::isnan(v) ? fill : v);
    }
    out.add_column(std::move(filled));
  }
  return out;
}

struct PruningRecommendation {
  std::string attribute;
  std::size_t cardinality = 0;
  std::string reason;  // "constant", "unique identifier" or "high cardinality"

  bool operator==(const PruningRecommendation&) const = default;
};

/// Flags feature columns that carry no diagnostic signal or would blow up
/// the split search. Advisory only: nothing is removed here.
inline std::vector<PruningRecommendation> recommend_pruning(
    const LogTable& table, std::size_t max_cardinality = kDefaultMaxCardinality) {
  if (max_cardinality < 1) throw ConfigError("max_cardinality must be >= 1");
  std::vector<PruningRecommendation> out;
  for (const auto& col : table.columns()) {
    if (col.role() != ColumnRole::Feature || table.row_count() == 0) continue;
    std::size_t card = col.distinct_count();
    if (card <= 1) {
      out.push_back({col.name(), card, "constant"});
    } else if (col.is_categorical() && card == table.row_count()) {
      out.push_back({col.name(), card, "unique identifier"});
    } else if (col.is_categorical() && card > max_cardinality) {
      out.push_back({col.name(), card, "high cardinality"});
    }
  }
  return out;
}

/// Marks the named columns Excluded, confirming a pruning recommendation.
inline LogTable exclude_columns(LogTable table, const std::vector<std::string>& names) {
  LogTable out;
  for (const auto& name : names) {
    if (!table.has_column(name)) throw ConfigError("cannot prune unknown column '" + name + "'");
  }
  for (auto col : table.columns()) {
    if (std::find(names.begin(), names.end(), col.name()) != names.end()) {
      if (col.role() == ColumnRole::Kpi) throw ConfigError("cannot prune the KPI column");
      col.set_role(ColumnRole::Excluded);
    }
    out.add_column(std::move(col));
  }
  return out;
}

struct StratifiedTable {
  LogTable table;
  std::vector<bool> labels;  // true = positive (violates the SLO)
  std::size_t positive_count = 0;
  std::size_t negative_count = 0;
};

/// Labels every row positive or negative by the KPI's SLO criterion.
inline std::vector<bool> stratify_labels(const LogTable& table, const KpiSpec& kpi) {
  const Column& col = table.column(kpi.column);
  std::vector<bool> labels(table.row_count());
  if (kpi.kind == KpiKind::Continuous) {
    if (!col.is_continuous()) throw DataError("KPI column '" + kpi.column + "' is not numeric");
    for (std::size_t r = 0; r < table.row_count(); ++r) {
      double v = col.number(r);
      if (std::isnan(v)) throw DataError("KPI column '" + kpi.column + "' has missing values");
      labels[r] = kpi.is_positive(v);
    }
  } else {
    if (!col.is_categorical()) {
      throw DataError("binary KPI column '" + kpi.column + "' is not categorical");
    }
    std::uint32_t positive = col.find_code(kpi.positive_label);
    for (std::size_t r = 0; r < table.row_count(); ++r) {
      if (col.is_missing(r)) {
        throw DataError("KPI column '" + kpi.column + "' has missing values");
      }
      labels[r] = positive != Column::kMissingCode && col.code(r) == positive;
    }
  }
  return labels;
}

inline StratifiedTable stratify(LogTable table, const KpiSpec& kpi) {
  StratifiedTable s;
  s.labels = stratify_labels(table, kpi);
  s.positive_count = static_cast<std::size_t>(std::count(s.labels.begin(), s.labels.end(), true));
  s.negative_count = s.labels.size() - s.positive_count;
  s.table = std::move(table);
  return s;
}

namespace detail {

// `k` distinct indices drawn uniformly from `pool` by a partial
// Fisher-Yates shuffle, returned in ascending order.
inline std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> pool,
                                                         std::size_t k, std::mt19937_64& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace detail

/// Row indices chosen by `sample`, ascending.
inline std::vector<std::size_t> sample_rows(const StratifiedTable& s, const KpiSpec& kpi,
                                            std::size_t target_rows, std::uint64_t seed) {
  if (target_rows < 2) throw ConfigError("sample size must be at least 2 rows");
  std::mt19937_64 rng(seed);
  const std::size_t n = s.table.row_count();
  if (kpi.kind == KpiKind::Binary || target_rows >= n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (target_rows >= n) return all;
    return detail::draw_without_replacement(std::move(all), target_rows, rng);
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t r = 0; r < n; ++r) (s.labels[r] ? pos : neg).push_back(r);
  std::size_t per_stratum = target_rows / 2;
  auto chosen = detail::draw_without_replacement(std::move(pos), per_stratum, rng);
  auto chosen_neg = detail::draw_without_replacement(std::move(neg), per_stratum, rng);
  chosen.insert(chosen.end(), chosen_neg.begin(), chosen_neg.end());
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

/// Random sample for binary KPIs; equal-allocation stratified sample (up to
/// target_rows / 2 per stratum) for continuous KPIs. A target at or above
/// the row count keeps every row.
inline LogTable sample(const StratifiedTable& s, const KpiSpec& kpi, std::size_t target_rows,
                       std::uint64_t seed) {
  auto rows = sample_rows(s, kpi, target_rows, seed);
  if (rows.size() == s.table.row_count()) return s.table;
  return s.table.gather(rows);
}

}  // namespace kpitriage

#endif  // KPITRIAGE_PREP_HPP_
