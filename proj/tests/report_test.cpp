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

#include <random>

#include "json.hpp"
#include "kpitriage/report.hpp"
#include "oracles.hpp"

namespace kpitriage {
namespace {

Rule auth_rule() {
  Rule r;
  r.scope_predicates = {Predicate::equals("Region", "NorthAmerica")};
  r.correlated_predicate = Predicate::greater_than("AuthLatency", 47);
  r.correlation_score = 12.5;
  r.request_count = 40;
  return r;
}

TEST(Query, ScopeThenCorrelated) {
  EXPECT_EQ(generate_query(auth_rule()), "SELECT * FROM logs WHERE Region = 'NorthAmerica' AND AuthLatency > 47");
}

TEST(Query, EmptyScopeHasOneConjunct) {
  Rule r;
  r.correlated_predicate = Predicate::equals("Rack", "AN150C01");
  EXPECT_EQ(generate_query(r, "orion_logs"), "SELECT * FROM orion_logs WHERE Rack = 'AN150C01'");
}

TEST(Query, NegatedForms) {
  Rule r;
  r.scope_predicates = {Predicate::equals("Region", "EU", false)};
  r.correlated_predicate = Predicate::greater_than("Lat", 0.5, false);
  EXPECT_EQ(generate_query(r), "SELECT * FROM logs WHERE Region <> 'EU' AND Lat <= 0.5");
}

TEST(Query, QuotingOfValuesAndIdentifiers) {
  Rule r;
  r.correlated_predicate = Predicate::equals("client name", "O'Brien");
  EXPECT_EQ(generate_query(r, "my logs"), "SELECT * FROM \"my logs\" WHERE \"client name\" = 'O''Brien'");
  r.correlated_predicate = Predicate::equals("a\"b", "x");
  EXPECT_EQ(generate_query(r), "SELECT * FROM logs WHERE \"a\"\"b\" = 'x'");
}

TEST(Query, ExecutionReturnsExactlyMatchingRows) {
  Column region("Region", ColumnKind::Categorical), auth("AuthLatency", ColumnKind::Continuous);
  std::vector<std::pair<std::string, double>> rows{
      {"NorthAmerica", 50}, {"NorthAmerica", 47}, {"Europe", 90}, {"NorthAmerica", 47.5}, {"O'Hare", 100}};
  for (const auto& [r, a] : rows) {
    region.push_category(r);
    auth.push_number(a);
  }
  LogTable t;
  t.add_column(std::move(region));
  t.add_column(std::move(auth));
  auto q = FilterQuery::parse(generate_query(auth_rule()));
  EXPECT_EQ(q.table(), "logs");
  EXPECT_EQ(q.execute(t), (std::vector<std::size_t>{0, 3}));
  Rule quote;
  quote.correlated_predicate = Predicate::equals("Region", "O'Hare");
  EXPECT_EQ(FilterQuery::parse(generate_query(quote)).execute(t), std::vector<std::size_t>{4});
}

TEST(Query, EvaluatorHandlesOtherOperatorsAndCase) {
  Column x("x", ColumnKind::Continuous);
  for (double v : {1.0, 2.0, 3.0}) x.push_number(v);
  LogTable t;
  t.add_column(std::move(x));
  EXPECT_EQ(FilterQuery::parse("select * from t where x >= 2").execute(t), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(FilterQuery::parse("SELECT * FROM t WHERE x < 2 AND x <> 5").execute(t), std::vector<std::size_t>{0});
  EXPECT_THROW(FilterQuery::parse("SELECT * FROM t WHERE"), ParseError);
  EXPECT_THROW(FilterQuery::parse("SELECT * FROM t WHERE x = 'a"), ParseError);
  EXPECT_THROW(FilterQuery::parse("DELETE FROM t"), ParseError);
  EXPECT_THROW(FilterQuery::parse("SELECT * FROM t WHERE y = 1").execute(t), SchemaError);
}

TEST(Query, MissingCellsMatchNothing) {
  Column x("x", ColumnKind::Continuous);
  x.push_number(1.0);
  x.push_missing();
  LogTable t;
  t.add_column(std::move(x));
  EXPECT_EQ(FilterQuery::parse("SELECT * FROM t WHERE x <= 5").execute(t), std::vector<std::size_t>{0});
}

TEST(Query, FuzzMatchesDirectEvaluation) {
  std::mt19937_64 rng(424242);
  for (int trial = 0; trial < 300; ++trial) {
    auto s = oracle::random_query_table(rng);
    auto t = s.to_log_table();
    auto r = oracle::random_rule(rng, s);
    auto sql = generate_query(r);
    EXPECT_EQ(FilterQuery::parse(sql).execute(t), oracle::rule_rows(s, r)) << sql;
  }
}

TriagedRule triaged(Rule r, TriageCategory c) { return TriagedRule{std::move(r), c, std::nullopt, std::nullopt, 0}; }

Report sample_report() {
  Report rep;
  rep.run_date = Date(2026, 5, 4);
  rep.kpi = "Latency";
  Rule rack;
  rack.correlated_predicate = Predicate::equals("Rack", "AN150C01");
  rack.scope_predicates = {Predicate::equals("RequestType", "Offbox"), Predicate::equals("LocDataCenter", "AN"),
                           Predicate::equals("CrossDataCenter", "true")};
  rack.correlation_score = 900;
  rack.request_count = 20;
  rack.full_request_count = 200;
  rack.performance_impact = 4419;
  Rule auth = auth_rule();
  rep.rules = {triaged(auth, TriageCategory::Known), triaged(rack, TriageCategory::New)};
  rep.resolved = {"Cluster=C9"};
  return rep;
}

TEST(Render, JsonShapeAndOrder) {
  auto doc = nlohmann::json::parse(render(sample_report(), ReportFormat::Json));
  EXPECT_EQ(doc["run_date"], "2026-05-04");
  EXPECT_EQ(doc["kpi"], "Latency");
  ASSERT_EQ(doc["rules"].size(), 2u);
  const auto& top = doc["rules"][0];
  EXPECT_EQ(top["rank"], 1);
  EXPECT_EQ(top["key"], "Rack=AN150C01");
  EXPECT_EQ(top["correlated_predicate"], "Rack:AN150C01");
  EXPECT_EQ(top["scope_predicates"],
            nlohmann::json::array({"RequestType:Offbox", "LocDataCenter:AN", "CrossDataCenter:true"}));
  EXPECT_EQ(top["request_count"], 20);
  EXPECT_EQ(top["full_request_count"], 200);
  EXPECT_EQ(top["performance_impact"], 4419.0);
  EXPECT_EQ(top["triage"], "new");
  EXPECT_EQ(top["query"],
            "SELECT * FROM logs WHERE RequestType = 'Offbox' AND LocDataCenter = 'AN' AND CrossDataCenter = 'true' "
            "AND Rack = 'AN150C01'");
  const auto& second = doc["rules"][1];
  EXPECT_EQ(second["correlated_predicate"], "AuthLatency > 47");
  EXPECT_TRUE(second["performance_impact"].is_null());
  EXPECT_TRUE(second["full_request_count"].is_null());
  EXPECT_EQ(doc["resolved"], nlohmann::json::array({"Cluster=C9"}));
}

TEST(Render, JsonRoundTripsThroughParser) {
  auto text = render(sample_report(), ReportFormat::Json);
  EXPECT_EQ(nlohmann::ordered_json::parse(text).dump(2) + "\n", text);
}

TEST(Render, EmptyReport) {
  Report rep;
  rep.run_date = Date(2026, 1, 2);
  rep.kpi = "Status";
  auto doc = nlohmann::json::parse(render(rep, ReportFormat::Json));
  EXPECT_TRUE(doc["rules"].is_array());
  EXPECT_TRUE(doc["rules"].empty());
  EXPECT_TRUE(doc["resolved"].empty());
  auto md = render(rep, ReportFormat::Markdown);
  EXPECT_NE(md.find("No rules were extracted."), std::string::npos);
  EXPECT_FALSE(needs_attention(rep));
}

TEST(Render, Markdown) {
  auto md = render(sample_report(), ReportFormat::Markdown);
  EXPECT_EQ(md.rfind("# KPI diagnosis: Latency, 2026-05-04\n", 0), 0u);
  auto first = md.find("| 1 | new | Rack:AN150C01 | RequestType:Offbox AND LocDataCenter:AN AND CrossDataCenter:true |");
  auto second = md.find("| 2 | known | AuthLatency > 47 | Region:NorthAmerica |");
  EXPECT_NE(first, std::string::npos);
  EXPECT_NE(second, std::string::npos);
  EXPECT_LT(first, second);
  EXPECT_NE(md.find("| stale |"), std::string::npos);
  EXPECT_NE(md.find("## Resolved\n\n- Cluster=C9\n"), std::string::npos);
}

TEST(Render, RankingIsAPermutation) {
  std::mt19937_64 rng(3);
  Report rep;
  for (int i = 0; i < 40; ++i) {
    Rule r;
    r.correlated_predicate = Predicate::equals("A", std::to_string(i));
    r.correlation_score = static_cast<double>(rng() % 10);
    rep.rules.push_back(triaged(r, TriageCategory::Known));
  }
  auto out = ranked(rep.rules);
  ASSERT_EQ(out.size(), rep.rules.size());
  std::set<std::string> keys;
  for (std::size_t i = 0; i < out.size(); ++i) {
    keys.insert(out[i].rule.key());
    if (i > 0) {
      EXPECT_GE(out[i - 1].rule.correlation_score, out[i].rule.correlation_score);
    }
  }
  EXPECT_EQ(keys.size(), rep.rules.size());
}

TEST(Attention, NewOrRegressedOnly) {
  Report rep;
  for (auto c : {TriageCategory::Known, TriageCategory::Improved}) rep.rules.push_back(triaged(auth_rule(), c));
  EXPECT_FALSE(needs_attention(rep));
  rep.rules.push_back(triaged(auth_rule(), TriageCategory::Regressed));
  EXPECT_TRUE(needs_attention(rep));
}

TEST(Precision, SetArithmetic) {
  auto r = precision({"A", "B", "C", "D"}, {"A", "B", "C"});
  EXPECT_DOUBLE_EQ(*r.precision, 0.75);
  EXPECT_EQ(r.valid_issue_count, 3u);
  EXPECT_EQ(r.false_positives, std::vector<std::string>{"D"});
  auto subset = precision({"A"}, {"A", "B"});
  EXPECT_DOUBLE_EQ(*subset.precision, 1.0);
  EXPECT_EQ(subset.missed, std::vector<std::string>{"B"});
  auto none = precision({"X"}, {"A"});
  EXPECT_DOUBLE_EQ(*none.precision, 0.0);
  EXPECT_EQ(none.valid_issue_count, 0u);
  EXPECT_FALSE(precision({}, {"A"}).precision);
}

TEST(Precision, BoundsAndPerfectIffNoFalsePositives) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> rep, truth;
    for (int i = 0; i < 6; ++i) {
      if (rng() % 2) rep.push_back(std::to_string(rng() % 8));
      if (rng() % 2) truth.push_back(std::to_string(rng() % 8));
    }
    auto r = precision(rep, truth);
    if (!r.precision) continue;
    EXPECT_GE(*r.precision, 0.0);
    EXPECT_LE(*r.precision, 1.0);
    EXPECT_EQ(*r.precision == 1.0, r.false_positives.empty());
  }
}

}  // namespace
}  // namespace kpitriage
