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

#include "kpitriage/ingest.hpp"

namespace kpitriage {
namespace {

SchemaConfig latency_config() {
  return SchemaConfig::from_json(nlohmann::json::parse(
      R"({"kpi": {"column": "AuthLatency", "kind": "continuous", "threshold": 5}})"));
}

TEST(LoadCsv, InfersKinds) {
  auto cfg = SchemaConfig::from_json(nlohmann::json::parse(
      R"({"kpi": {"column": "Status", "kind": "binary", "positive": "fail"}})"));
  auto t = load_csv_text("Region,AuthLatency,Status\nNorthAmerica,12.5,ok\n", cfg);
  ASSERT_EQ(t.row_count(), 1u);
  EXPECT_TRUE(t.column("Region").is_categorical());
  EXPECT_TRUE(t.column("AuthLatency").is_continuous());
  EXPECT_EQ(t.column("AuthLatency").number(0), 12.5);
  EXPECT_EQ(t.column("Status").role(), ColumnRole::Kpi);
}

TEST(LoadCsv, EmptyCellIsMissing) {
  auto t = load_csv_text("Region,AuthLatency\nNorthAmerica,\nEurope,3\n", latency_config());
  EXPECT_TRUE(t.column("AuthLatency").is_missing(0));
  EXPECT_EQ(t.column("AuthLatency").number(1), 3.0);
}

TEST(LoadCsv, QuotedFields) {
  auto t = load_csv_text("Name,AuthLatency\r\n\"a,\"\"b\"\"\nc\",1\r\n", latency_config());
  EXPECT_EQ(t.column("Name").category(0), "a,\"b\"\nc");
}

TEST(LoadCsv, DeclaredKindWins) {
  auto cfg = SchemaConfig::from_json(nlohmann::json::parse(
      R"({"columns": {"Zip": {"kind": "categorical"}, "Id": {"role": "excluded"}},
          "kpi": {"column": "AuthLatency", "kind": "continuous", "threshold": 5}})"));
  auto t = load_csv_text("Zip,Id,AuthLatency\n02139,7,1\n", cfg);
  EXPECT_TRUE(t.column("Zip").is_categorical());
  EXPECT_EQ(t.column("Zip").category(0), "02139");
  EXPECT_EQ(t.column("Id").role(), ColumnRole::Excluded);
}

TEST(LoadCsv, ErrorsCarryLineNumbers) {
  try {
    load_csv_text("A,AuthLatency\nx,1\ny\n", latency_config());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  try {
    load_csv_text("A,AuthLatency\nx,abc\n", latency_config());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadCsv, KpiColumnAbsentIsConfigError) {
  EXPECT_THROW(load_csv_text("A,B\nx,1\n", latency_config()), ConfigError);
}

TEST(LoadCsv, NonNumericKpiRejected) {
  EXPECT_THROW(load_csv_text("AuthLatency\nslow\n", latency_config()), ParseError);
}

TEST(LoadJsonl, OmittedFieldIsMissing) {
  auto t = load_jsonl_text(
      "{\"Region\": \"NA\", \"AuthLatency\": 4}\n{\"AuthLatency\": 7}\n", latency_config());
  ASSERT_EQ(t.row_count(), 2u);
  EXPECT_TRUE(t.column("Region").is_missing(1));
  EXPECT_TRUE(t.column("AuthLatency").is_continuous());
}

TEST(LoadJsonl, RejectsNestedAndBadLines) {
  EXPECT_THROW(load_jsonl_text("{\"AuthLatency\": {\"a\": 1}}\n", latency_config()), ParseError);
  try {
    load_jsonl_text("{\"AuthLatency\": 1}\nnot json\n", latency_config());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(SchemaConfigTest, Validation) {
  EXPECT_THROW(SchemaConfig::from_json(nlohmann::json::parse("{}")), ConfigError);
  EXPECT_THROW(SchemaConfig::from_json(nlohmann::json::parse(R"({"kpi": {"column": "x"}})")),
               ConfigError);
  EXPECT_THROW(SchemaConfig::from_json(nlohmann::json::parse(
                   R"({"kpi": {"column": "x", "kind": "binary"}})")),
               ConfigError);
  EXPECT_THROW(SchemaConfig::from_json(nlohmann::json::parse(
                   R"({"columns": {"y": {"role": "kpi"}},
                       "kpi": {"column": "x", "kind": "continuous", "threshold": 1}})")),
               ConfigError);
}

TEST(Cardinality, CountsDistinctExcludingMissing) {
  auto t = load_csv_text("A,AuthLatency\na,1\nb,2\na,3\n,4\n", latency_config());
  auto c = measure_cardinality(t);
  EXPECT_EQ(c.at("A"), 2u);
  EXPECT_FALSE(c.contains("AuthLatency"));
}

TEST(Cardinality, EmptyTable) {
  auto t = load_csv_text("A,AuthLatency\n", latency_config());
  EXPECT_EQ(t.row_count(), 0u);
  EXPECT_EQ(measure_cardinality(t).at("A"), 0u);
}

TEST(Cardinality, MillionDistinctValues) {
  Column c("Organization", ColumnKind::Categorical);
  c.reserve(1'000'000);
  for (int i = 0; i < 1'000'000; ++i) c.push_category("org" + std::to_string(i));
  LogTable t;
  t.add_column(std::move(c));
  EXPECT_EQ(measure_cardinality(t).at("Organization"), 1'000'000u);
}

TEST(CsvWriter, RoundTripsThroughLoader) {
  auto t = load_csv_text("Name,AuthLatency\n\"a,b\",0.1\n\"q\"\"\",\n plain ,3\n", latency_config());
  auto again = load_csv_text(to_csv(t), latency_config());
  EXPECT_EQ(again, t);
}

TEST(LoadFile, DeterministicAndFormatByExtension) {
  auto dir = std::filesystem::temp_directory_path() / "kpitriage_ingest_test";
  std::filesystem::create_directories(dir);
  write_text_file(dir / "a.csv", "A,AuthLatency\nx,1\ny,2\n");
  write_text_file(dir / "a.jsonl", "{\"A\":\"x\",\"AuthLatency\":1}\n{\"A\":\"y\",\"AuthLatency\":2}\n");
  auto a = load(dir / "a.csv", format_from_path(dir / "a.csv"), latency_config());
  auto b = load(dir / "a.csv", InputFormat::Csv, latency_config());
  auto c = load(dir / "a.jsonl", format_from_path(dir / "a.jsonl"), latency_config());
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_THROW(load(dir / "absent.csv", InputFormat::Csv, latency_config()), Error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace kpitriage
