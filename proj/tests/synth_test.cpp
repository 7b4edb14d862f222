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

#include <cmath>

#include "json.hpp"
#include "kpitriage/synth.hpp"

namespace kpitriage {
namespace {

const Date kDay(2026, 4, 1);

GeneratorConfig rack_config(std::size_t rows, double shift) {
  auto doc = nlohmann::json::parse(R"({
    "seed": 11,
    "attributes": [
      {"name": "Rack", "cardinality": 100},
      {"name": "Region", "values": ["NorthAmerica", "Europe", "Asia"]},
      {"name": "Payload", "kind": "continuous", "min": 0, "max": 1000, "integer": true}
    ],
    "kpi": {"name": "Latency", "kind": "continuous"}
  })");
  doc["row_count"] = rows;
  if (shift > 0) {
    doc["faults"] = nlohmann::json::array(
        {{{"trigger", {{{"attribute", "Rack"}, {"equals", "Rack_7"}}}}, {"shift", shift}}});
  }
  return GeneratorConfig::from_json(doc);
}

GeneratorConfig binary_config(std::size_t rows, double rate) {
  GeneratorConfig cfg = ladder_profile(3, rows, 100, 5);
  cfg.kpi.kind = KpiKind::Binary;
  cfg.kpi.name = "Outcome";
  cfg.kpi.failure_rate = rate;
  return cfg;
}

double positive_rate(const GeneratedLogs& g, const KpiSpec& kpi) {
  const auto& col = g.table.column(kpi.column);
  std::size_t pos = 0;
  for (std::size_t r = 0; r < g.table.row_count(); ++r) {
    pos += col.is_continuous() ? kpi.is_positive(col.number(r)) : kpi.is_positive(col.category(r));
  }
  return static_cast<double>(pos) / static_cast<double>(g.table.row_count());
}

void expect_within_binomial(double rate, double p, std::size_t n) {
  double sd = std::sqrt(p * (1 - p) / static_cast<double>(n));
  EXPECT_LE(std::abs(rate - p), 3 * sd) << "rate " << rate << " vs " << p;
}

TEST(Generate, BaseRatesWithinBinomialBounds) {
  const std::size_t n = 300'000;
  auto bin = binary_config(n, 0.001);
  expect_within_binomial(positive_rate(generate(bin, kDay), bin.kpi_spec()), 0.001, n);
  auto bin2 = binary_config(n, 0.2);
  expect_within_binomial(positive_rate(generate(bin2, kDay), bin2.kpi_spec()), 0.2, n);
  // Default log-normal KPI puts about 0.1% of rows above the SLO.
  auto cont = rack_config(n, 0);
  double expected = 0.5 * std::erfc(std::log(cont.kpi.threshold / cont.kpi.median) / cont.kpi.sigma / std::sqrt(2.0));
  EXPECT_NEAR(expected, 0.001, 2e-4);
  expect_within_binomial(positive_rate(generate(cont, kDay), cont.kpi_spec()), expected, n);
}

TEST(Generate, ShiftFaultImpact) {
  auto cfg = rack_config(200'000, 4419);
  auto g = generate(cfg, kDay);
  ASSERT_EQ(g.manifest.faults.size(), 1u);
  const auto& f = g.manifest.faults[0];
  EXPECT_EQ(f.keys, std::vector<std::string>{"Rack=Rack_7"});
  const auto& rack = g.table.column("Rack");
  const auto& lat = g.table.column("Latency");
  double sum_all = 0, sum_hit = 0;
  std::size_t hit = 0;
  for (std::size_t r = 0; r < g.table.row_count(); ++r) {
    sum_all += lat.number(r);
    if (rack.category(r) == "Rack_7") {
      sum_hit += lat.number(r);
      ++hit;
    }
  }
  EXPECT_EQ(hit, f.affected_rows);
  double frac = static_cast<double>(hit) / static_cast<double>(g.table.row_count());
  EXPECT_NEAR(frac, 0.01, 0.002);
  double impact = sum_hit / static_cast<double>(hit) - sum_all / static_cast<double>(g.table.row_count());
  // A shift s on a fraction f of rows moves the subset-minus-global gap by s(1-f).
  EXPECT_NEAR(f.expected_impact, 4419 * (1 - frac), 1e-6);
  EXPECT_NEAR(impact, f.expected_impact, 0.05);
}

TEST(Generate, SameSeedSameTable) {
  auto cfg = rack_config(70'000, 100);
  auto a = generate(cfg, kDay);
  auto b = generate(cfg, kDay);
  EXPECT_EQ(a.table, b.table);
  EXPECT_EQ(a.degraded, b.degraded);
  auto other = cfg;
  other.seed = 12;
  EXPECT_FALSE(generate(other, kDay).table == a.table);
}

TEST(Generate, ManifestIsExact) {
  auto with = rack_config(80'000, 50);
  auto without = rack_config(80'000, 0);
  auto g = generate(with, kDay);
  auto base = generate(without, kDay);
  const auto& rack = g.table.column("Rack");
  for (std::size_t r = 0; r < g.table.row_count(); ++r) {
    bool trigger = rack.category(r) == "Rack_7";
    ASSERT_EQ(g.degraded[r], trigger);
    double got = g.table.column("Latency").number(r);
    double was = base.table.column("Latency").number(r);
    if (trigger) {
      ASSERT_DOUBLE_EQ(got, was + 50);
    } else {
      ASSERT_EQ(got, was);
    }
  }
}

TEST(Generate, BinaryFaultsRaiseTheSubsetRate) {
  auto cfg = binary_config(200'000, 0.01);
  cfg.faults.push_back(FaultSpec{{Predicate::equals("Attr01", "Attr01_3")}, FaultEffect::FailureProbability, 0.6, std::nullopt, std::nullopt});
  auto g = generate(cfg, kDay);
  const auto& col = g.table.column("Attr01");
  const auto& out = g.table.column("Outcome");
  std::size_t hit = 0, fail = 0;
  for (std::size_t r = 0; r < g.table.row_count(); ++r) {
    ASSERT_EQ(g.degraded[r], col.category(r) == "Attr01_3");
    if (!g.degraded[r]) continue;
    ++hit;
    fail += out.category(r) == "failure";
  }
  expect_within_binomial(static_cast<double>(fail) / static_cast<double>(hit), 0.6, hit);
  double global = positive_rate(g, cfg.kpi_spec());
  double frac = static_cast<double>(hit) / static_cast<double>(g.table.row_count());
  EXPECT_NEAR(g.manifest.faults[0].expected_impact, (0.6 - 0.01) * (1 - frac), 1e-9);
  EXPECT_NEAR(static_cast<double>(fail) / static_cast<double>(hit) - global, g.manifest.faults[0].expected_impact,
              0.03);
}

TEST(Generate, CardinalityExactWhenRowsAllow) {
  auto cfg = ladder_profile(8, 100'000, 10'000, 3);
  std::vector<std::size_t> expected{10, 27, 72, 193, 518, 1389, 3728, 10000};
  ASSERT_EQ(cfg.attributes.size(), 8u);
  auto g = generate(cfg, kDay);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(cfg.attributes[i].cardinality, expected[i]) << i;
    EXPECT_EQ(g.table.column(cfg.attributes[i].name).distinct_count(), expected[i]) << i;
  }
  // Every value present even below the 10x ratio.
  auto tight = ladder_profile(1, 500, 10, 1);
  tight.attributes[0].cardinality = 500;
  EXPECT_EQ(generate(tight, kDay).table.column("Attr00").distinct_count(), 500u);
}

TEST(Generate, ZipfSkewsTowardLowRanks) {
  auto cfg = rack_config(50'000, 0);
  cfg.attributes[0].zipf_exponent = 1.2;
  auto g = generate(cfg, kDay);
  const auto& rack = g.table.column("Rack");
  std::size_t first = 0, last = 0;
  for (std::size_t r = 0; r < g.table.row_count(); ++r) {
    first += rack.category(r) == "Rack_0";
    last += rack.category(r) == "Rack_99";
  }
  EXPECT_GT(first, 20 * last);
}

TEST(Generate, ContinuousAttributesRespectRange) {
  auto g = generate(rack_config(20'000, 0), kDay);
  const auto& col = g.table.column("Payload");
  for (std::size_t r = 0; r < g.table.row_count(); ++r) {
    double v = col.number(r);
    ASSERT_GE(v, 0);
    ASSERT_LE(v, 1000);
    ASSERT_EQ(v, std::floor(v));
  }
}

TEST(Generate, FaultWindowDrivesResolvedScenario) {
  auto cfg = rack_config(10'000, 300);
  cfg.faults[0].active_from = Date(2026, 4, 1);
  cfg.faults[0].active_to = Date(2026, 4, 5);
  cfg.validate();
  for (int d = 0; d < 7; ++d) {
    auto g = generate(cfg, Date(2026, 4, 1).plus_days(d));
    EXPECT_EQ(g.manifest.faults.size(), d < 5 ? 1u : 0u) << d;
  }
  auto bad = cfg;
  bad.faults[0].active_to = Date(2026, 3, 1);
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(GeneratorConfig, RejectsInvalidFaults) {
  auto cfg = rack_config(1000, 10);
  auto expect_bad = [&](auto mutate) {
    auto c = cfg;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  expect_bad([](GeneratorConfig& c) { c.faults[0].amount = 0; });
  expect_bad([](GeneratorConfig& c) { c.faults[0].amount = -5; });
  expect_bad([](GeneratorConfig& c) {
    c.faults[0].effect = FaultEffect::Multiplier;
    c.faults[0].amount = 0.9;
  });
  expect_bad([](GeneratorConfig& c) { c.faults[0].effect = FaultEffect::FailureProbability; });
  expect_bad([](GeneratorConfig& c) { c.faults[0].trigger = {Predicate::equals("Nope", "x")}; });
  expect_bad([](GeneratorConfig& c) { c.faults[0].trigger = {Predicate::equals("Rack", "Rack_100")}; });
  expect_bad([](GeneratorConfig& c) { c.faults[0].trigger = {Predicate::greater_than("Rack", 1)}; });
  expect_bad([](GeneratorConfig& c) { c.faults[0].trigger.clear(); });
  expect_bad([](GeneratorConfig& c) { c.attributes.push_back(c.attributes[0]); });
  expect_bad([](GeneratorConfig& c) { c.attributes[0].name = "Latency"; });
  auto bin = binary_config(1000, 0.1);
  bin.faults.push_back(FaultSpec{{Predicate::equals("Attr00", "Attr00_1")}, FaultEffect::FailureProbability, 0.05, std::nullopt, std::nullopt});
  EXPECT_THROW(bin.validate(), ConfigError);
  bin.faults[0].amount = 0.5;
  EXPECT_NO_THROW(bin.validate());
  EXPECT_THROW(GeneratorConfig::from_json(nlohmann::json::parse(R"({"attributes": [{"name": "a"}],
      "faults": [{"trigger": [{"attribute": "a", "equals": "a_1"}], "shift": 1, "multiplier": 2}]})")),
               ConfigError);
  EXPECT_THROW(GeneratorConfig::from_json(nlohmann::json::parse(R"({"attributes": [{"name": "a", "kind": "x"}]})")),
               ConfigError);
}

TEST(GeneratorConfig, JsonRoundTripReproducesData) {
  auto cfg = rack_config(5000, 25);
  cfg.faults[0].active_from = Date(2026, 1, 1);
  auto again = GeneratorConfig::from_json(cfg.to_json());
  EXPECT_EQ(generate(again, kDay).table, generate(cfg, kDay).table);
  auto profile = GeneratorConfig::from_json(nlohmann::json::parse(R"({"row_count": 3000, "profile": {"features": 4, "max_cardinality": 1000}})"));
  EXPECT_EQ(profile.attributes.size(), 4u);
  EXPECT_EQ(profile.attributes.back().cardinality, 1000u);
}

TEST(TruthManifest, JsonRoundTrip) {
  auto g = generate(rack_config(5000, 25), kDay);
  auto back = TruthManifest::from_json(g.manifest.to_json());
  EXPECT_EQ(back.to_json(), g.manifest.to_json());
  EXPECT_EQ(back.keys(), std::vector<std::string>{"Rack=Rack_7"});
  EXPECT_EQ(back.day, kDay);
}

}  // namespace
}  // namespace kpitriage
