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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "kpitriage/triage.hpp"
#include "oracles.hpp"

namespace kpitriage {
namespace {

namespace fs = std::filesystem;

const Date kDay0(2026, 1, 1);

Rule rule(const std::string& key_value, double score) {
  Rule r;
  r.correlated_predicate = Predicate::equals("A", key_value);
  r.correlation_score = score;
  r.request_count = 5;
  return r;
}

// Records `days` past runs in which key A=k scores `scores[i]`.
HistoryStore history_with(const std::vector<double>& scores, const std::string& k = "k") {
  HistoryStore store;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    record_run({rule(k, scores[i])}, store, kDay0.plus_days(static_cast<int>(i)));
  }
  return store;
}

Date day_after(const std::vector<double>& scores) { return kDay0.plus_days(static_cast<int>(scores.size())); }

TriageCategory verdict(const std::vector<double>& history, double today) {
  auto store = history_with(history);
  return triage({rule("k", today)}, store, day_after(history))[0].category;
}

TEST(Triage, ConstantHistoryOnlyExactScoreIsKnown) {
  std::vector<double> h(14, 10.0);
  EXPECT_EQ(verdict(h, 10.0), TriageCategory::Known);
  EXPECT_EQ(verdict(h, 10.5), TriageCategory::Regressed);
  EXPECT_EQ(verdict(h, 9.5), TriageCategory::Improved);
}

TEST(Triage, OneSigmaThresholds) {
  std::vector<double> h;
  for (int i = 0; i < 7; ++i) {
    h.push_back(90);
    h.push_back(110);
  }
  auto [mu, sd] = oracle::mean_stddev(h);
  EXPECT_DOUBLE_EQ(mu, 100.0);
  EXPECT_DOUBLE_EQ(sd, 10.0);
  EXPECT_EQ(verdict(h, 125), TriageCategory::Regressed);
  EXPECT_EQ(verdict(h, 110), TriageCategory::Known);
  EXPECT_EQ(verdict(h, 90), TriageCategory::Known);
  EXPECT_EQ(verdict(h, 89.9), TriageCategory::Improved);
  auto store = history_with(h);
  auto t = triage({rule("k", 125)}, store, day_after(h))[0];
  EXPECT_DOUBLE_EQ(*t.history_mean, 100.0);
  EXPECT_NEAR(*t.history_stddev, 10.0, 1e-12);
  EXPECT_EQ(t.history_points, 14u);
}

TEST(Triage, AbsentKeyIsNew) {
  std::vector<double> h(14, 3.0);
  auto store = history_with(h);
  auto out = triage({rule("other", 3.0)}, store, day_after(h));
  EXPECT_EQ(out[0].category, TriageCategory::New);
  EXPECT_FALSE(out[0].history_mean);
}

TEST(Triage, ColdStartUntilFourteenRunDates) {
  for (std::size_t days = 0; days < 14; ++days) {
    std::vector<double> h(days, 10.0);
    EXPECT_EQ(verdict(h, 10.0), TriageCategory::New) << days;
  }
  EXPECT_EQ(verdict(std::vector<double>(14, 10.0), 10.0), TriageCategory::Known);
}

TEST(Triage, EmptyRunsStillCountAsRunDates) {
  HistoryStore store;
  record_run({rule("k", 10)}, store, kDay0);
  for (int d = 1; d < 14; ++d) record_run({}, store, kDay0.plus_days(d));
  EXPECT_EQ(store.run_dates_before(kDay0.plus_days(14)).size(), 14u);
  EXPECT_EQ(triage({rule("k", 10)}, store, kDay0.plus_days(14))[0].category, TriageCategory::Known);
}

TEST(Triage, WindowIsTheFourteenMostRecentRunDates) {
  // An early spike falls out of the window after 14 later runs.
  std::vector<double> h{1000};
  for (int i = 0; i < 14; ++i) h.push_back(10);
  EXPECT_EQ(verdict(h, 10), TriageCategory::Known);
  // Key last seen 15 run dates ago is New again.
  HistoryStore store;
  record_run({rule("k", 10)}, store, kDay0);
  for (int d = 1; d <= 14; ++d) record_run({rule("j", 1)}, store, kDay0.plus_days(d));
  EXPECT_EQ(triage({rule("k", 10)}, store, kDay0.plus_days(15))[0].category, TriageCategory::New);
}

TEST(Triage, GapsInCalendarDoNotMatter) {
  HistoryStore store;
  for (int i = 0; i < 14; ++i) record_run({rule("k", 10)}, store, kDay0.plus_days(3 * i));
  EXPECT_EQ(triage({rule("k", 10)}, store, kDay0.plus_days(100))[0].category, TriageCategory::Known);
}

TEST(Triage, IgnoresTodayAndFutureRecords) {
  std::vector<double> h(14, 10.0);
  auto store = history_with(h);
  Date today = day_after(h);
  record_run({rule("k", 500)}, store, today);
  record_run({rule("k", 500)}, store, today.plus_days(1));
  EXPECT_EQ(triage({rule("k", 10)}, store, today)[0].category, TriageCategory::Known);
}

TEST(Triage, PureFunctionOfInputs) {
  std::mt19937_64 rng(5);
  std::vector<double> h;
  for (int i = 0; i < 20; ++i) h.push_back(static_cast<double>(rng() % 50));
  auto store = history_with(h);
  std::vector<Rule> today{rule("k", 25), rule("z", 1)};
  auto a = triage(today, store, day_after(h));
  auto b = triage(today, store, day_after(h));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].category, b[i].category);
}

TEST(Triage, MonotoneInTodaysScore) {
  std::mt19937_64 rng(6);
  auto rank = [](TriageCategory c) {
    return c == TriageCategory::Improved ? 0 : c == TriageCategory::Known ? 1 : 2;
  };
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> h;
    for (int i = 0; i < 14; ++i) h.push_back(std::uniform_real_distribution<double>(0, 100)(rng));
    int last = -1;
    for (double s = -10; s <= 110; s += 2.5) {
      int r = rank(verdict(h, s));
      EXPECT_GE(r, last);
      last = r;
    }
  }
}

TEST(Triage, StatisticsMatchTwoPassOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> h;
    for (int i = 0; i < 14; ++i) h.push_back(std::lognormal_distribution<double>(5, 2)(rng));
    auto store = history_with(h);
    auto t = triage({rule("k", 1.0)}, store, day_after(h))[0];
    auto [mu, sd] = oracle::mean_stddev(h);
    EXPECT_NEAR(*t.history_mean, mu, 1e-9 * std::abs(mu));
    EXPECT_NEAR(*t.history_stddev, sd, 1e-9 * std::max(1.0, sd));
  }
}

TEST(Resolved, PreviousRunKeysAbsentToday) {
  HistoryStore store;
  EXPECT_TRUE(detect_resolved({rule("a", 1)}, store, kDay0).empty());
  record_run({rule("a", 1), rule("b", 1)}, store, kDay0);
  EXPECT_EQ(detect_resolved({rule("a", 1)}, store, kDay0.plus_days(1)), std::vector<std::string>{"A=b"});
  record_run({rule("a", 1)}, store, kDay0.plus_days(1));
  EXPECT_TRUE(detect_resolved({rule("a", 1), rule("c", 1)}, store, kDay0.plus_days(2)).empty());
}

TEST(Resolved, OnlyTheLatestPreviousRunCounts) {
  HistoryStore store;
  record_run({rule("a", 1), rule("b", 1)}, store, kDay0);
  record_run({}, store, kDay0.plus_days(1));
  EXPECT_TRUE(detect_resolved({}, store, kDay0.plus_days(2)).empty());
}

TEST(HistoryStore, DuplicateRecordsRejected) {
  HistoryStore store;
  record_run({rule("a", 1)}, store, kDay0);
  EXPECT_THROW(record_run({rule("a", 2)}, store, kDay0), DataError);
  EXPECT_THROW(store.append({HistoryRecord{kDay0.plus_days(1), "x", 1, 1}, HistoryRecord{kDay0.plus_days(1), "x", 2, 1}}),
               DataError);
  EXPECT_EQ(store.records().size(), 2u);
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kpitriage_triage_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

using HistoryFile = TempDir;

TEST_F(HistoryFile, AppendThenReload) {
  auto path = dir_ / "history.tsv";
  {
    auto store = HistoryStore::open(path);
    EXPECT_TRUE(store.records().empty());
    Rule odd;
    odd.correlated_predicate = Predicate::equals("we\tird", "a\\b\nc");
    odd.correlation_score = 0.1 + 0.2;
    odd.request_count = 42;
    record_run({rule("a", 1.5), odd}, store, kDay0);
  }
  auto reloaded = HistoryStore::open(path);
  ASSERT_EQ(reloaded.records().size(), 3u);
  EXPECT_EQ(reloaded.records()[0].predicate_key, kRunMarkerKey);
  EXPECT_EQ(reloaded.records()[2].predicate_key, "we\tird=a\\b\nc");
  EXPECT_EQ(reloaded.records()[2].correlation_score, 0.1 + 0.2);
  EXPECT_EQ(reloaded.records()[2].request_count, 42u);
  EXPECT_FALSE(fs::exists(dir_ / "history.tsv.tmp"));
}

TEST_F(HistoryFile, FourteenRunsLiftColdStartOnTheFifteenth) {
  auto path = dir_ / "history.tsv";
  for (int d = 0; d < 15; ++d) {
    auto store = HistoryStore::open(path);
    auto out = triage({rule("k", 7)}, store, kDay0.plus_days(d));
    EXPECT_EQ(out[0].category, d < 14 ? TriageCategory::New : TriageCategory::Known) << d;
    record_run({rule("k", 7)}, store, kDay0.plus_days(d));
  }
}

TEST_F(HistoryFile, FailedWriteLeavesStoreUnchanged) {
  auto path = dir_ / "history.tsv";
  auto store = HistoryStore::open(path);
  record_run({rule("a", 1)}, store, kDay0);
  // Replace the file with a directory so the rename step fails.
  fs::remove(path);
  fs::create_directories(path / "blocker");
  EXPECT_THROW(record_run({rule("b", 1)}, store, kDay0.plus_days(1)), Error);
  EXPECT_EQ(store.records().size(), 2u);
  EXPECT_FALSE(store.contains(kDay0.plus_days(1), "A=b"));
}

TEST_F(HistoryFile, MalformedFilesReportLine) {
  auto path = dir_ / "history.tsv";
  auto write = [&](const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
  };
  auto line_of = [&]() -> std::size_t {
    try {
      HistoryStore::open(path);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  write("2026-01-01\tA=a\t1\t1\n2026-01-01\tA=b\tx\t1\n");
  EXPECT_EQ(line_of(), 2u);
  write("2026-01-01\tA=a\t1\t1\n\n2026-13-01\tA=b\t1\t1\n");
  EXPECT_EQ(line_of(), 3u);
  write("2026-01-01\tA=a\t1\n");
  EXPECT_EQ(line_of(), 1u);
  write("2026-01-01\tA=a\t1\t1\n2026-01-01\tA=a\t2\t1\n");
  EXPECT_EQ(line_of(), 2u);
  write("2026-01-01\tA=a\t1\t-1\n");
  EXPECT_EQ(line_of(), 1u);
}

}  // namespace
}  // namespace kpitriage
