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

// Structured JSON for predicates and rules, used by intermediate files.
// Numbers are written in shortest round-trip form, so rules survive a
// write/read cycle bit for bit.

#ifndef KPITRIAGE_JSON_IO_HPP_
#define KPITRIAGE_JSON_IO_HPP_

#include <string>
#include <vector>

#include "json.hpp"
#include "kpitriage/core.hpp"

namespace kpitriage {

inline nlohmann::json predicate_to_json(const Predicate& p) {
  nlohmann::json j;
  j["attribute"] = p.attribute;
  if (p.is_equals()) {
    j["equals"] = p.category();
  } else {
    j["greater_than"] = p.threshold();
  }
  if (!p.polarity) j["polarity"] = false;
  return j;
}

inline Predicate predicate_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("attribute")) {
    throw ConfigError("predicate needs an 'attribute'");
  }
  bool polarity = j.value("polarity", true);
  auto attribute = j.at("attribute").get<std::string>();
  if (j.contains("equals")) {
    return Predicate::equals(attribute, j.at("equals").get<std::string>(), polarity);
  }
  if (j.contains("greater_than")) {
    return Predicate::greater_than(attribute, j.at("greater_than").get<double>(), polarity);
  }
  throw ConfigError("predicate on '" + attribute + "' needs 'equals' or 'greater_than'");
}

inline nlohmann::json rule_to_json(const Rule& r) {
  nlohmann::json j;
  j["correlated_predicate"] = predicate_to_json(r.correlated_predicate);
  j["scope_predicates"] = nlohmann::json::array();
  for (const auto& p : r.scope_predicates) j["scope_predicates"].push_back(predicate_to_json(p));
  j["correlation_score"] = r.correlation_score;
  j["request_count"] = r.request_count;
  j["performance_impact"] = r.performance_impact ? nlohmann::json(*r.performance_impact) : nlohmann::json();
  j["full_request_count"] =
      r.full_request_count ? nlohmann::json(*r.full_request_count) : nlohmann::json();
  j["as_of"] = r.as_of.to_string();
  return j;
}

inline Rule rule_from_json(const nlohmann::json& j) {
  try {
    Rule r;
    r.correlated_predicate = predicate_from_json(j.at("correlated_predicate"));
    for (const auto& p : j.value("scope_predicates", nlohmann::json::array())) {
      r.scope_predicates.push_back(predicate_from_json(p));
    }
    r.correlation_score = j.at("correlation_score").get<double>();
    r.request_count = j.at("request_count").get<std::size_t>();
    if (j.contains("performance_impact") && !j.at("performance_impact").is_null()) {
      r.performance_impact = j.at("performance_impact").get<double>();
    }
    if (j.contains("full_request_count") && !j.at("full_request_count").is_null()) {
      r.full_request_count = j.at("full_request_count").get<std::size_t>();
    }
    if (j.contains("as_of")) r.as_of = Date::parse(j.at("as_of").get<std::string>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("rule: ") + e.what(), 0);
  }
}

inline nlohmann::json rules_to_json(const std::vector<Rule>& rules) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rules) arr.push_back(rule_to_json(r));
  return arr;
}

inline std::vector<Rule> rules_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw ParseError("rules must be a JSON array", 0);
  std::vector<Rule> out;
  for (const auto& j : arr) out.push_back(rule_from_json(j));
  return out;
}

}  // namespace kpitriage

#endif  // KPITRIAGE_JSON_IO_HPP_
