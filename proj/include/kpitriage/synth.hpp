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

// Synthetic request logs with planted faults. A fault degrades the KPI of
// every row matching its trigger while the run date lies in its active
// range; the returned manifest names exactly those faults.
//
// Row generation is split into fixed blocks, each drawing from its own
// seeded substream, so output depends only on the config and never on the
// thread count.

#ifndef KPITRIAGE_SYNTH_HPP_
#define KPITRIAGE_SYNTH_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "kpitriage/core.hpp"
#include "kpitriage/forest.hpp"
#include "kpitriage/ingest.hpp"
#include "kpitriage/json_io.hpp"
#include "kpitriage/table.hpp"

namespace kpitriage {

struct AttributeProfile {
  std::string name;
  ColumnKind kind = ColumnKind::Categorical;

  // Categorical: values are `values` if given, otherwise "<name>_<i>".
  std::size_t cardinality = 10;
  std::vector<std::string> values;
  double zipf_exponent = 0.0;  // 0 = uniform

  // Continuous: uniform on [min, max], optionally whole numbers.
  double min = 0.0;
  double max = 1.0;
  bool integer = false;

  std::string value_name(std::size_t i) const {
    return values.empty() ? name + "_" + std::to_string(i) : values[i];
  }
};

struct BaseKpi {
  std::string name = "Latency";
  KpiKind kind = KpiKind::Continuous;
  // Continuous: log-normal with this median and log-space sigma. The
  // defaults put about 0.1% of rows above the 5 ms threshold.
  double median = 2.0;
  double sigma = 0.2965;
  double threshold = 5.0;
  // Binary.
  double failure_rate = 0.001;
  std::string positive_label = "failure";
  std::string negative_label = "success";
};

enum class FaultEffect { Shift, Multiplier, FailureProbability };

struct FaultSpec {
  std::vector<Predicate> trigger;  // conjunction
  FaultEffect effect = FaultEffect::Shift;
  double amount = 0.0;
  std::optional<Date> active_from;  // inclusive; absent = unbounded
  std::optional<Date> active_to;

  bool active_on(const Date& day) const {
    return (!active_from || *active_from <= day) && (!active_to || day <= *active_to);
  }
};

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::size_t row_count = 100'000;
  std::vector<AttributeProfile> attributes;
  BaseKpi kpi;
  std::vector<FaultSpec> faults;

  void validate() const;
  static GeneratorConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  KpiSpec kpi_spec() const {
    KpiSpec s;
    s.column = kpi.name;
    s.kind = kpi.kind;
    s.threshold = kpi.threshold;
    s.direction = SloDirection::Above;
    s.positive_label = kpi.positive_label;
    return s;
  }

  /// Declarations that make a CSV of the generated table load back with the
  /// generated column kinds.
  SchemaConfig schema_config() const {
    SchemaConfig s;
    for (const auto& a : attributes) s.columns[a.name] = ColumnDecl{a.kind, ColumnRole::Feature};
    s.columns[kpi.name] = ColumnDecl{std::nullopt, ColumnRole::Kpi};
    s.kpi = kpi_spec();
    return s;
  }

  nlohmann::json schema_json() const {
    nlohmann::json doc;
    doc["columns"] = nlohmann::json::object();
    for (const auto& a : attributes) {
      doc["columns"][a.name] = {
          {"kind", a.kind == ColumnKind::Categorical ? "categorical" : "continuous"}};
    }
    if (kpi.kind == KpiKind::Continuous) {
      doc["kpi"] = {{"column", kpi.name}, {"kind", "continuous"}, {"threshold", kpi.threshold},
                    {"direction", "above"}};
    } else {
      doc["kpi"] = {{"column", kpi.name}, {"kind", "binary"}, {"positive", kpi.positive_label}};
    }
    return doc;
  }
};

/// A cardinality ladder from 10 up to `max_cardinality`, one categorical
/// attribute per rung, with a log-normal latency KPI.
inline GeneratorConfig ladder_profile(std::size_t feature_count, std::size_t row_count,
                                      std::size_t max_cardinality = 10'000,
                                      std::uint64_t seed = 1) {
  GeneratorConfig cfg;
  cfg.seed = seed;
  cfg.row_count = row_count;
  double top = std::log10(static_cast<double>(std::max<std::size_t>(max_cardinality, 10)));
  for (std::size_t i = 0; i < feature_count; ++i) {
    AttributeProfile a;
    char name[32];
    std::snprintf(name, sizeof(name), "Attr%02zu", i);
    a.name = name;
    double t = feature_count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(feature_count - 1);
    a.cardinality = static_cast<std::size_t>(std::llround(std::pow(10.0, 1.0 + t * (top - 1.0))));
    cfg.attributes.push_back(std::move(a));
  }
  return cfg;
}

struct ManifestFault {
  std::size_t index = 0;  // position in GeneratorConfig::faults
  std::vector<Predicate> trigger;
  std::vector<std::string> keys;
  FaultEffect effect = FaultEffect::Shift;
  double amount = 0.0;
  std::size_t affected_rows = 0;
  // Expected subset-minus-global KPI delta attributable to the faults,
  // computed from the per-row degradation actually applied.
  double expected_impact = 0.0;
};

struct TruthManifest {
  Date day;
  std::uint64_t seed = 0;
  std::size_t row_count = 0;
  std::vector<ManifestFault> faults;  // active faults only

  /// Canonical keys of every active fault's trigger predicates, sorted.
  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& f : faults) out.insert(out.end(), f.keys.begin(), f.keys.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  nlohmann::json to_json() const;
  static TruthManifest from_json(const nlohmann::json& doc);
};

struct GeneratedLogs {
  LogTable table;
  TruthManifest manifest;
  std::vector<bool> degraded;  // row matched an active fault
};

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view effect_name(FaultEffect e) {
  switch (e) {
    case FaultEffect::Shift: return "shift";
    case FaultEffect::Multiplier: return "multiplier";
    case FaultEffect::FailureProbability: return "failure_probability";
  }
  return "shift";
}

inline std::optional<Date> optional_date(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  try {
    return Date::parse(j.at(key).get<std::string>());
  } catch (const ParseError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

}  // namespace detail

inline void GeneratorConfig::validate() const {
  if (row_count < 1) throw ConfigError("row_count must be >= 1");
  if (attributes.empty()) throw ConfigError("generator needs at least one attribute");
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    const auto& a = attributes[i];
    if (a.name.empty()) throw ConfigError("attribute name must not be empty");
    if (a.name == kpi.name) throw ConfigError("attribute '" + a.name + "' clashes with the KPI");
    for (std::size_t j = 0; j < i; ++j) {
      if (attributes[j].name == a.name) throw ConfigError("duplicate attribute '" + a.name + "'");
    }
    if (a.kind == ColumnKind::Categorical) {
      if (a.cardinality < 1) throw ConfigError("attribute '" + a.name + "': cardinality must be >= 1");
      if (!a.values.empty() && a.values.size() != a.cardinality) {
        throw ConfigError("attribute '" + a.name + "': values must list cardinality entries");
      }
      if (!(a.zipf_exponent >= 0.0)) throw ConfigError("attribute '" + a.name + "': zipf_exponent < 0");
      std::unordered_set<std::string> names;
      for (std::size_t v = 0; v < a.values.size(); ++v) {
        if (a.values[v].empty() || !names.insert(a.values[v]).second) {
          throw ConfigError("attribute '" + a.name + "': values must be distinct and non-empty");
        }
      }
    } else if (!(a.min <= a.max) || !std::isfinite(a.min) || !std::isfinite(a.max)) {
      throw ConfigError("attribute '" + a.name + "': need finite min <= max");
    }
  }
  if (kpi.kind == KpiKind::Continuous) {
    if (!(kpi.median > 0.0) || !(kpi.sigma >= 0.0)) {
      throw ConfigError("kpi: median must be > 0 and sigma >= 0");
    }
  } else {
    if (!(kpi.failure_rate >= 0.0 && kpi.failure_rate < 1.0)) {
      throw ConfigError("kpi.failure_rate must lie in [0, 1)");
    }
    if (kpi.positive_label == kpi.negative_label || kpi.positive_label.empty() ||
        kpi.negative_label.empty()) {
      throw ConfigError("kpi labels must be distinct and non-empty");
    }
  }
  for (std::size_t i = 0; i < faults.size(); ++i) {
    const auto& f = faults[i];
    std::string where = "fault " + std::to_string(i);
    if (f.trigger.empty()) throw ConfigError(where + ": trigger must not be empty");
    for (const auto& p : f.trigger) {
      auto it = std::find_if(attributes.begin(), attributes.end(),
                             [&](const AttributeProfile& a) { return a.name == p.attribute; });
      if (it == attributes.end()) {
        throw ConfigError(where + ": unknown attribute '" + p.attribute + "'");
      }
      if (p.is_equals() != (it->kind == ColumnKind::Categorical)) {
        throw ConfigError(where + ": predicate kind does not match attribute '" + p.attribute + "'");
      }
      if (p.is_equals()) {
        bool known = false;
        for (std::size_t v = 0; v < it->cardinality && !known; ++v) known = it->value_name(v) == p.category();
        if (!known) throw ConfigError(where + ": '" + p.category() + "' is not a value of " + p.attribute);
      }
    }
    if (f.active_from && f.active_to && *f.active_to < *f.active_from) {
      throw ConfigError(where + ": active range ends before it starts");
    }
    bool degrades = false;
    switch (f.effect) {
      case FaultEffect::Shift: degrades = kpi.kind == KpiKind::Continuous && f.amount > 0.0; break;
      case FaultEffect::Multiplier: degrades = kpi.kind == KpiKind::Continuous && f.amount > 1.0; break;
      case FaultEffect::FailureProbability:
        degrades = kpi.kind == KpiKind::Binary && f.amount > kpi.failure_rate && f.amount <= 1.0;
        break;
    }
    if (!degrades) throw ConfigError(where + ": effect must strictly degrade the KPI");
  }
}

inline GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& doc) {
  try {
    GeneratorConfig cfg;
    cfg.seed = doc.value("seed", std::uint64_t{1});
    cfg.row_count = doc.value("row_count", std::size_t{100'000});
    if (doc.contains("profile")) {
      const auto& p = doc.at("profile");
      auto ladder = ladder_profile(p.value("features", std::size_t{8}), cfg.row_count,
                                   p.value("max_cardinality", std::size_t{10'000}), cfg.seed);
      cfg.attributes = std::move(ladder.attributes);
    }
    for (const auto& a : doc.value("attributes", nlohmann::json::array())) {
      AttributeProfile p;
      p.name = a.at("name").get<std::string>();
      auto kind = a.value("kind", std::string("categorical"));
      if (kind == "categorical") {
        p.kind = ColumnKind::Categorical;
        p.values = a.value("values", std::vector<std::string>{});
        p.cardinality = a.value("cardinality", p.values.empty() ? std::size_t{10} : p.values.size());
        auto dist = a.value("distribution", std::string("uniform"));
        if (dist == "zipf") {
          p.zipf_exponent = a.value("zipf_exponent", 1.0);
        } else if (dist != "uniform") {
          throw ConfigError("attribute '" + p.name + "': unknown distribution '" + dist + "'");
        }
      } else if (kind == "continuous") {
        p.kind = ColumnKind::Continuous;
        p.min = a.value("min", 0.0);
        p.max = a.value("max", 1.0);
        p.integer = a.value("integer", false);
      } else {
        throw ConfigError("attribute '" + p.name + "': unknown kind '" + kind + "'");
      }
      cfg.attributes.push_back(std::move(p));
    }
    if (doc.contains("kpi")) {
      const auto& k = doc.at("kpi");
      cfg.kpi.name = k.value("name", cfg.kpi.name);
      auto kind = k.value("kind", std::string("continuous"));
      if (kind == "continuous") {
        cfg.kpi.kind = KpiKind::Continuous;
        cfg.kpi.median = k.value("median", cfg.kpi.median);
        cfg.kpi.sigma = k.value("sigma", cfg.kpi.sigma);
        cfg.kpi.threshold = k.value("threshold", cfg.kpi.threshold);
      } else if (kind == "binary") {
        cfg.kpi.kind = KpiKind::Binary;
        if (!k.contains("name")) cfg.kpi.name = "Outcome";
        cfg.kpi.failure_rate = k.value("failure_rate", cfg.kpi.failure_rate);
        cfg.kpi.positive_label = k.value("positive", cfg.kpi.positive_label);
        cfg.kpi.negative_label = k.value("negative", cfg.kpi.negative_label);
      } else {
        throw ConfigError("kpi.kind must be 'continuous' or 'binary'");
      }
    }
    for (const auto& f : doc.value("faults", nlohmann::json::array())) {
      FaultSpec spec;
      for (const auto& p : f.at("trigger")) spec.trigger.push_back(predicate_from_json(p));
      int effects = 0;
      for (auto [key, effect] : {std::pair{"shift", FaultEffect::Shift},
                                 std::pair{"multiplier", FaultEffect::Multiplier},
                                 std::pair{"failure_probability", FaultEffect::FailureProbability}}) {
        if (f.contains(key)) {
          spec.effect = effect;
          spec.amount = f.at(key).get<double>();
          ++effects;
        }
      }
      if (effects != 1) {
        throw ConfigError("fault needs exactly one of shift, multiplier, failure_probability");
      }
      spec.active_from = detail::optional_date(f, "active_from");
      spec.active_to = detail::optional_date(f, "active_to");
      cfg.faults.push_back(std::move(spec));
    }
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generator config: ") + e.what());
  }
}

inline nlohmann::json GeneratorConfig::to_json() const {
  nlohmann::json doc;
  doc["seed"] = seed;
  doc["row_count"] = row_count;
  doc["attributes"] = nlohmann::json::array();
  for (const auto& a : attributes) {
    nlohmann::json j{{"name", a.name}};
    if (a.kind == ColumnKind::Categorical) {
      j["kind"] = "categorical";
      j["cardinality"] = a.cardinality;
      if (!a.values.empty()) j["values"] = a.values;
      if (a.zipf_exponent > 0.0) {
        j["distribution"] = "zipf";
        j["zipf_exponent"] = a.zipf_exponent;
      }
    } else {
      j["kind"] = "continuous";
      j["min"] = a.min;
      j["max"] = a.max;
      if (a.integer) j["integer"] = true;
    }
    doc["attributes"].push_back(std::move(j));
  }
  if (kpi.kind == KpiKind::Continuous) {
    doc["kpi"] = {{"name", kpi.name}, {"kind", "continuous"}, {"median", kpi.median},
                  {"sigma", kpi.sigma}, {"threshold", kpi.threshold}};
  } else {
    doc["kpi"] = {{"name", kpi.name}, {"kind", "binary"}, {"failure_rate", kpi.failure_rate},
                  {"positive", kpi.positive_label}, {"negative", kpi.negative_label}};
  }
  doc["faults"] = nlohmann::json::array();
  for (const auto& f : faults) {
    nlohmann::json j;
    j["trigger"] = nlohmann::json::array();
    for (const auto& p : f.trigger) j["trigger"].push_back(predicate_to_json(p));
    j[std::string(detail::effect_name(f.effect))] = f.amount;
    if (f.active_from) j["active_from"] = f.active_from->to_string();
    if (f.active_to) j["active_to"] = f.active_to->to_string();
    doc["faults"].push_back(std::move(j));
  }
  return doc;
}

inline nlohmann::json TruthManifest::to_json() const {
  nlohmann::json doc;
  doc["day"] = day.to_string();
  doc["seed"] = seed;
  doc["row_count"] = row_count;
  doc["keys"] = keys();
  doc["faults"] = nlohmann::json::array();
  for (const auto& f : faults) {
    nlohmann::json j;
    j["index"] = f.index;
    j["trigger"] = nlohmann::json::array();
    for (const auto& p : f.trigger) j["trigger"].push_back(predicate_to_json(p));
    j["keys"] = f.keys;
    j["effect"] = detail::effect_name(f.effect);
    j["amount"] = f.amount;
    j["affected_rows"] = f.affected_rows;
    j["expected_impact"] = f.expected_impact;
    doc["faults"].push_back(std::move(j));
  }
  return doc;
}

inline TruthManifest TruthManifest::from_json(const nlohmann::json& doc) {
  try {
    TruthManifest m;
    m.day = Date::parse(doc.at("day").get<std::string>());
    m.seed = doc.value("seed", std::uint64_t{0});
    m.row_count = doc.value("row_count", std::size_t{0});
    for (const auto& j : doc.value("faults", nlohmann::json::array())) {
      ManifestFault f;
      f.index = j.value("index", std::size_t{0});
      for (const auto& p : j.at("trigger")) f.trigger.push_back(predicate_from_json(p));
      f.keys = j.at("keys").get<std::vector<std::string>>();
      auto effect = j.value("effect", std::string("shift"));
      f.effect = effect == "multiplier"            ? FaultEffect::Multiplier
                 : effect == "failure_probability" ? FaultEffect::FailureProbability
                                                   : FaultEffect::Shift;
      f.amount = j.value("amount", 0.0);
      f.affected_rows = j.value("affected_rows", std::size_t{0});
      f.expected_impact = j.value("expected_impact", 0.0);
      m.faults.push_back(std::move(f));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::size_t kSynthBlockRows = std::size_t{1} << 16;

inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t block) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream * 0x100000001B3ull + block)));
}

template <typename Fn>
void for_each_block(std::size_t rows, Fn&& fn) {
  std::size_t blocks = (rows + kSynthBlockRows - 1) / kSynthBlockRows;
  std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) fn(b, b * kSynthBlockRows, std::min(rows, (b + 1) * kSynthBlockRows));
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t b = w; b < blocks; b += workers) {
        fn(b, b * kSynthBlockRows, std::min(rows, (b + 1) * kSynthBlockRows));
      }
    });
  }
}

// Category codes for one attribute; each value present at least once when
// the row count allows it.
inline std::vector<std::uint32_t> draw_codes(const AttributeProfile& a, std::uint64_t seed,
                                             std::uint64_t stream, std::size_t rows) {
  std::vector<std::uint32_t> codes(rows);
  std::optional<std::discrete_distribution<std::uint32_t>> zipf;
  if (a.zipf_exponent > 0.0) {
    std::vector<double> w(a.cardinality);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::pow(static_cast<double>(i + 1), -a.zipf_exponent);
    zipf.emplace(w.begin(), w.end());
  }
  for_each_block(rows, [&](std::size_t b, std::size_t lo, std::size_t hi) {
    auto rng = substream(seed, stream, b);
    auto dist = zipf ? *zipf : std::discrete_distribution<std::uint32_t>{};
    std::uniform_int_distribution<std::uint32_t> uniform(0, static_cast<std::uint32_t>(a.cardinality - 1));
    for (std::size_t r = lo; r < hi; ++r) codes[r] = zipf ? dist(rng) : uniform(rng);
  });
  if (rows >= a.cardinality) {
    // Floyd's algorithm: cardinality distinct rows, value i planted at the i-th.
    auto rng = substream(seed, stream, ~std::uint64_t{0});
    std::unordered_set<std::size_t> taken;
    std::vector<std::size_t> chosen;
    chosen.reserve(a.cardinality);
    for (std::size_t j = rows - a.cardinality; j < rows; ++j) {
      std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
      std::size_t pick = taken.insert(t).second ? t : j;
      if (pick == j) taken.insert(j);
      chosen.push_back(pick);
    }
    for (std::size_t i = 0; i < chosen.size(); ++i) codes[chosen[i]] = static_cast<std::uint32_t>(i);
  }
  return codes;
}

}  // namespace detail

/// Draws the logs for `day`. The data depend only on `cfg` (including its
/// seed); `day` selects which faults are active.
inline GeneratedLogs generate(const GeneratorConfig& cfg, const Date& day) {
  cfg.validate();
  const std::size_t n = cfg.row_count;
  const std::size_t attr_count = cfg.attributes.size();
  LogTable table;
  for (std::size_t a = 0; a < attr_count; ++a) {
    const auto& prof = cfg.attributes[a];
    Column col(prof.name, prof.kind);
    col.reserve(n);
    if (prof.kind == ColumnKind::Categorical) {
      auto codes = detail::draw_codes(prof, cfg.seed, a + 1, n);
      // Dictionary in first-occurrence order, as a reader of the CSV builds it.
      std::vector<std::uint32_t> remap(prof.cardinality, Column::kMissingCode);
      for (std::uint32_t c : codes) {
        if (remap[c] == Column::kMissingCode) remap[c] = col.intern(prof.value_name(c));
        col.push_code(remap[c]);
      }
    } else {
      std::vector<double> values(n);
      detail::for_each_block(n, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        auto rng = detail::substream(cfg.seed, a + 1, b);
        std::uniform_real_distribution<double> dist(prof.min, prof.max);
        for (std::size_t r = lo; r < hi; ++r) {
          double v = prof.min == prof.max ? prof.min : dist(rng);
          values[r] = prof.integer ? std::clamp(std::floor(v), std::ceil(prof.min), std::floor(prof.max)) : v;
        }
      });
      for (double v : values) col.push_number(v);
    }
    table.add_column(std::move(col));
  }

  // Base KPI, then fault effects from a separate stream.
  std::vector<double> base(n);
  const std::uint64_t kpi_stream = 0;
  const std::uint64_t fault_stream = attr_count + 1;
  detail::for_each_block(n, [&](std::size_t b, std::size_t lo, std::size_t hi) {
    auto rng = detail::substream(cfg.seed, kpi_stream, b);
    if (cfg.kpi.kind == KpiKind::Continuous) {
      std::lognormal_distribution<double> dist(std::log(cfg.kpi.median), cfg.kpi.sigma);
      for (std::size_t r = lo; r < hi; ++r) base[r] = cfg.kpi.sigma == 0.0 ? cfg.kpi.median : dist(rng);
    } else {
      std::bernoulli_distribution dist(cfg.kpi.failure_rate);
      for (std::size_t r = lo; r < hi; ++r) base[r] = dist(rng) ? 1.0 : 0.0;
    }
  });

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < cfg.faults.size(); ++i) {
    if (cfg.faults[i].active_on(day)) active.push_back(i);
  }
  std::vector<std::vector<bool>> matches(active.size(), std::vector<bool>(n, false));
  for (std::size_t k = 0; k < active.size(); ++k) {
    const auto& trigger = cfg.faults[active[k]].trigger;
    for (std::size_t r : matching_rows(table, trigger)) matches[k][r] = true;
  }

  GeneratedLogs out;
  out.degraded.assign(n, false);
  std::vector<double> kpi(base);
  std::vector<double> delta(n, 0.0);  // per-row expected KPI increase
  detail::for_each_block(n, [&](std::size_t b, std::size_t lo, std::size_t hi) {
    auto rng = detail::substream(cfg.seed, fault_stream, b);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t r = lo; r < hi; ++r) {
      double value = base[r];
      double p_fail = cfg.kpi.failure_rate;
      bool hit = false;
      for (std::size_t k = 0; k < active.size(); ++k) {
        if (!matches[k][r]) continue;
        hit = true;
        const auto& f = cfg.faults[active[k]];
        switch (f.effect) {
          case FaultEffect::Shift: value += f.amount; break;
          case FaultEffect::Multiplier: value *= f.amount; break;
          case FaultEffect::FailureProbability: p_fail = std::max(p_fail, f.amount); break;
        }
      }
      // One draw per row keeps the stream aligned whether or not a fault hits.
      double u = unit(rng);
      if (hit && cfg.kpi.kind == KpiKind::Binary) {
        double base_p = cfg.kpi.failure_rate;
        double flip = base_p >= 1.0 ? 0.0 : (p_fail - base_p) / (1.0 - base_p);
        if (value == 0.0 && u < flip) value = 1.0;
        delta[r] = p_fail - base_p;
      } else if (hit) {
        delta[r] = value - base[r];
      }
      out.degraded[r] = hit;
      kpi[r] = value;
    }
  });

  Column kpi_col(cfg.kpi.name, cfg.kpi.kind == KpiKind::Continuous ? ColumnKind::Continuous
                                                                   : ColumnKind::Categorical,
                 ColumnRole::Kpi);
  kpi_col.reserve(n);
  if (cfg.kpi.kind == KpiKind::Continuous) {
    for (double v : kpi) kpi_col.push_number(v);
  } else {
    for (double v : kpi) kpi_col.push_category(v != 0.0 ? cfg.kpi.positive_label : cfg.kpi.negative_label);
  }
  table.add_column(std::move(kpi_col));

  double delta_mean = 0.0;
  for (double d : delta) delta_mean += d;
  delta_mean /= static_cast<double>(n);

  out.manifest.day = day;
  out.manifest.seed = cfg.seed;
  out.manifest.row_count = n;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const auto& f = cfg.faults[active[k]];
    ManifestFault mf;
    mf.index = active[k];
    mf.trigger = f.trigger;
    for (const auto& p : f.trigger) mf.keys.push_back(canonical_key(p));
    mf.effect = f.effect;
    mf.amount = f.amount;
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (matches[k][r]) {
        ++mf.affected_rows;
        sum += delta[r];
      }
    }
    mf.expected_impact = mf.affected_rows == 0 ? 0.0 : sum / static_cast<double>(mf.affected_rows) - delta_mean;
    out.manifest.faults.push_back(std::move(mf));
  }
  out.table = std::move(table);
  return out;
}

}  // namespace kpitriage

#endif  // KPITRIAGE_SYNTH_HPP_
