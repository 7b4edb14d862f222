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

// History-based triage. The store keeps one record per (run date, predicate
// key); triage compares today's correlation score with the mean and
// population standard deviation of the key's scores over the most recent
// kTriageWindow run dates before today.

#ifndef KPITRIAGE_TRIAGE_HPP_
#define KPITRIAGE_TRIAGE_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kpitriage/core.hpp"

namespace kpitriage {

/// Number of prior run dates consulted, and required before triage leaves
/// cold start.
inline constexpr std::size_t kTriageWindow = 14;

/// Key of the marker record written for every run, so that a run which
/// produced no rules still counts as a run date.
inline const std::string kRunMarkerKey;

struct HistoryRecord {
  Date run_date;
  std::string predicate_key;
  double correlation_score = 0.0;
  std::size_t request_count = 0;

  bool operator==(const HistoryRecord&) const = default;
};

/// Append-only record store, persisted as tab-separated lines
/// `run_date<TAB>predicate_key<TAB>score<TAB>count`. Keys escape backslash,
/// tab and newline.
class HistoryStore {
 public:
  /// Empty store that is never written to disk.
  HistoryStore() = default;

  /// Loads `path`; a missing file is an empty store.
  static HistoryStore open(const std::filesystem::path& path) {
    HistoryStore store;
    store.path_ = path;
    std::ifstream in(path, std::ios::binary);
    if (!in) return store;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      store.insert(parse_line(line, number), number);
    }
    return store;
  }

  const std::vector<HistoryRecord>& records() const { return records_; }
  const std::optional<std::filesystem::path>& path() const { return path_; }

  /// Distinct run dates strictly before `today`, ascending.
  std::vector<Date> run_dates_before(const Date& today) const {
    std::vector<Date> out;
    for (const auto& d : dates_) {
      if (d < today) out.push_back(d);
    }
    return out;
  }

  bool contains(const Date& date, const std::string& key) const {
    return index_.contains({date, key});
  }

  /// Appends `batch`; on a file-backed store the file is rewritten through a
  /// temporary and renamed into place before the in-memory view changes.
  /// Rejects a batch that repeats an existing (date, key) pair.
  void append(const std::vector<HistoryRecord>& batch) {
    std::set<std::pair<Date, std::string>> seen;
    for (const auto& r : batch) {
      if (contains(r.run_date, r.predicate_key) || !seen.insert({r.run_date, r.predicate_key}).second) {
        throw DataError("history already has a record for " + r.run_date.to_string() + " / " +
                        r.predicate_key);
      }
    }
    if (path_) {
      auto tmp = *path_;
      tmp += ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write history file '" + tmp.string() + "'");
        for (const auto& r : records_) out << format_line(r) << '\n';
        for (const auto& r : batch) out << format_line(r) << '\n';
        out.flush();
        if (!out) throw Error("failed writing history file '" + tmp.string() + "'");
      }
      std::error_code ec;
      std::filesystem::rename(tmp, *path_, ec);
      if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error("cannot replace history file '" + path_->string() + "'");
      }
    }
    for (const auto& r : batch) insert(r, 0);
  }

  static std::string format_line(const HistoryRecord& r) {
    std::string key;
    for (char c : r.predicate_key) {
      if (c == '\\') {
        key += "\\\\";
      } else if (c == '\t') {
        key += "\\t";
      } else if (c == '\n') {
        key += "\\n";
      } else {
        key += c;
      }
    }
    return r.run_date.to_string() + '\t' + key + '\t' + format_number(r.correlation_score) + '\t' +
           std::to_string(r.request_count);
  }

  static HistoryRecord parse_line(const std::string& line, std::size_t number) {
    std::vector<std::string> fields(1);
    for (std::size_t i = 0; i < line.size(); ++i) {
      char c = line[i];
      if (c == '\t') {
        fields.emplace_back();
      } else if (c == '\\' && i + 1 < line.size()) {
        char e = line[++i];
        fields.back() += e == 't' ? '\t' : e == 'n' ? '\n' : e;
      } else {
        fields.back() += c;
      }
    }
    if (fields.size() != 4) throw ParseError("history line needs four fields", number);
    HistoryRecord r;
    try {
      r.run_date = Date::parse(fields[0]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), number);
    }
    r.predicate_key = fields[1];
    auto score = parse_number(fields[2]);
    auto count = parse_number(fields[3]);
    if (!score) throw ParseError("bad score '" + fields[2] + "'", number);
    if (!count || *count < 0 || std::floor(*count) != *count) {
      throw ParseError("bad count '" + fields[3] + "'", number);
    }
    r.correlation_score = *score;
    r.request_count = static_cast<std::size_t>(*count);
    return r;
  }

 private:
  void insert(HistoryRecord r, std::size_t line) {
    if (!index_.insert({r.run_date, r.predicate_key}).second) {
      throw ParseError("duplicate record for " + r.run_date.to_string() + " / " + r.predicate_key,
                       line);
    }
    dates_.insert(r.run_date);
    records_.push_back(std::move(r));
  }

  std::optional<std::filesystem::path> path_;
  std::vector<HistoryRecord> records_;
  std::set<std::pair<Date, std::string>> index_;
  std::set<Date> dates_;
};

struct TriagedRule {
  Rule rule;
  TriageCategory category = TriageCategory::New;
  std::optional<double> history_mean;
  std::optional<double> history_stddev;
  std::size_t history_points = 0;
};

/// Mean and population standard deviation (Welford).
struct RunningStats {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  double stddev() const { return n == 0 ? 0.0 : std::sqrt(std::max(0.0, m2) / static_cast<double>(n)); }
};

/// Classifies `score` against window statistics.
inline TriageCategory classify_score(double score, const RunningStats& s) {
  double sd = s.stddev();
  if (score > s.mean + sd) return TriageCategory::Regressed;
  if (score < s.mean - sd) return TriageCategory::Improved;
  return TriageCategory::Known;
}

/// New / Regressed / Known / Improved for each of today's rules. Until the
/// store holds kTriageWindow run dates before today every rule is New.
inline std::vector<TriagedRule> triage(const std::vector<Rule>& rules, const HistoryStore& store,
                                       const Date& today) {
  auto dates = store.run_dates_before(today);
  bool cold_start = dates.size() < kTriageWindow;
  std::map<std::string, RunningStats> stats;
  if (!cold_start) {
    Date window_start = dates[dates.size() - kTriageWindow];
    // Records are ordered by insertion; fold them in date order so the
    // statistics do not depend on file layout.
    std::vector<const HistoryRecord*> in_window;
    for (const auto& r : store.records()) {
      if (r.run_date >= window_start && r.run_date < today) in_window.push_back(&r);
    }
    std::stable_sort(in_window.begin(), in_window.end(),
                     [](const auto* a, const auto* b) { return a->run_date < b->run_date; });
    for (const auto* r : in_window) {
      if (r->predicate_key != kRunMarkerKey) stats[r->predicate_key].add(r->correlation_score);
    }
  }
  std::vector<TriagedRule> out;
  out.reserve(rules.size());
  for (const auto& rule : rules) {
    TriagedRule t{rule, TriageCategory::New, std::nullopt, std::nullopt, 0};
    if (!cold_start) {
      if (auto it = stats.find(rule.key()); it != stats.end()) {
        t.category = classify_score(rule.correlation_score, it->second);
        t.history_mean = it->second.mean;
        t.history_stddev = it->second.stddev();
        t.history_points = it->second.n;
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

/// Keys recorded on the latest run date before `today` that are absent from
/// today's rules, sorted.
inline std::vector<std::string> detect_resolved(const std::vector<Rule>& rules_today,
                                                const HistoryStore& store, const Date& today) {
  auto dates = store.run_dates_before(today);
  if (dates.empty()) return {};
  const Date& previous = dates.back();
  std::set<std::string> present;
  for (const auto& r : rules_today) present.insert(r.key());
  std::set<std::string> resolved;
  for (const auto& rec : store.records()) {
    if (rec.run_date == previous && rec.predicate_key != kRunMarkerKey &&
        !present.contains(rec.predicate_key)) {
      resolved.insert(rec.predicate_key);
    }
  }
  return {resolved.begin(), resolved.end()};
}

/// Appends the run marker and one record per rule for `today`.
inline void record_run(const std::vector<Rule>& rules, HistoryStore& store, const Date& today) {
  std::vector<HistoryRecord> batch;
  batch.reserve(rules.size() + 1);
  batch.push_back(HistoryRecord{today, kRunMarkerKey, 0.0, 0});
  for (const auto& r : rules) {
    batch.push_back(HistoryRecord{today, r.key(), r.correlation_score, r.request_count});
  }
  store.append(batch);
}

}  // namespace kpitriage

#endif  // KPITRIAGE_TRIAGE_HPP_
