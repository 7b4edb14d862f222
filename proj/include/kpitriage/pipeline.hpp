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

// End-to-end diagnosis:
//
//   ingest -> impute -> prune -> stratify -> sample -> train -> extract
//     -> filter/dedup/floor -> impact -> triage -> record -> report
//
// Each stage is also callable on its own; running them in sequence through
// intermediate files gives the same report as diagnose().

#ifndef KPITRIAGE_PIPELINE_HPP_
#define KPITRIAGE_PIPELINE_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kpitriage/core.hpp"
#include "kpitriage/forest.hpp"
#include "kpitriage/ingest.hpp"
#include "kpitriage/json_io.hpp"
#include "kpitriage/prep.hpp"
#include "kpitriage/report.hpp"
#include "kpitriage/rules.hpp"
#include "kpitriage/table.hpp"
#include "kpitriage/triage.hpp"

namespace kpitriage {

/// A failure inside one pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string cause, bool config_error)
      : Error("stage '" + stage + "': " + cause),
        stage_(std::move(stage)),
        config_error_(config_error) {}
  const std::string& stage() const { return stage_; }
  bool is_config_error() const { return config_error_; }

 private:
  std::string stage_;
  bool config_error_;
};

struct DiagnoseConfig {
  SchemaConfig schema;
  std::optional<TargetKind> model;  // nullopt: by KPI kind
  std::string scoring = "orion";
  double min_score = 0.0;
  std::size_t num_trees = 50;
  double feature_sample_ratio = 0.6;
  double min_leaf_pct = 1.0;
  std::uint64_t seed = 0;
  std::size_t sample_rows = kDefaultSampleRows;
  std::size_t max_cardinality = kDefaultMaxCardinality;
  bool prune_recommended = false;  // confirm every recommendation
  std::vector<std::string> prune;  // confirmed by name
  std::string table_name = "logs";
  std::optional<InputFormat> format;
  std::optional<Date> run_date;

  TargetKind target_kind() const {
    if (model) return *model;
    return schema.kpi.kind == KpiKind::Continuous ? TargetKind::Regression
                                                  : TargetKind::Classification;
  }

  void validate() const {
    Hyperparams h{1, feature_sample_ratio, num_trees, seed};
    h.validate();
    if (!(min_leaf_pct > 0.0 && min_leaf_pct <= 100.0)) {
      throw ConfigError("min_leaf_pct must lie in (0, 100]");
    }
    if (sample_rows < 2) throw ConfigError("sample_rows must be at least 2");
    if (max_cardinality < 1) throw ConfigError("max_cardinality must be >= 1");
    if (!std::isfinite(min_score)) throw ConfigError("min_score must be finite");
    make_scoring_function(scoring);
  }

  static DiagnoseConfig from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    try {
      DiagnoseConfig c;
      c.schema = SchemaConfig::from_json(doc);
      auto model = doc.value("model", std::string("auto"));
      if (model == "classification") {
        c.model = TargetKind::Classification;
      } else if (model == "regression") {
        c.model = TargetKind::Regression;
      } else if (model != "auto") {
        throw ConfigError("model must be 'auto', 'classification' or 'regression'");
      }
      c.scoring = doc.value("scoring", c.scoring);
      c.min_score = doc.value("min_score", c.min_score);
      if (doc.contains("hyperparams")) {
        const auto& h = doc.at("hyperparams");
        c.num_trees = h.value("num_trees", c.num_trees);
        c.feature_sample_ratio = h.value("feature_sample_ratio", c.feature_sample_ratio);
        c.min_leaf_pct = h.value("min_leaf_pct", c.min_leaf_pct);
        c.seed = h.value("seed", c.seed);
      }
      c.sample_rows = doc.value("sample_rows", c.sample_rows);
      c.max_cardinality = doc.value("max_cardinality", c.max_cardinality);
      if (doc.contains("prune")) {
        const auto& p = doc.at("prune");
        if (p.is_string() && p.get<std::string>() == "recommended") {
          c.prune_recommended = true;
        } else if (p.is_array()) {
          c.prune = p.get<std::vector<std::string>>();
        } else {
          throw ConfigError("prune must be \"recommended\" or a list of column names");
        }
      }
      c.table_name = doc.value("table_name", c.table_name);
      if (doc.contains("format")) c.format = parse_input_format(doc.at("format").get<std::string>());
      if (doc.contains("run_date")) c.run_date = Date::parse(doc.at("run_date").get<std::string>());
      c.validate();
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    } catch (const ParseError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }

  static DiagnoseConfig load(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config '" + path.string() + "': " + e.what());
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    return from_json(doc);
  }

  Hyperparams hyperparams(std::size_t training_rows) const {
    double leaf = std::ceil(min_leaf_pct * static_cast<double>(training_rows) / 100.0 - 1e-9);
    return Hyperparams{static_cast<std::size_t>(std::max(1.0, leaf)), feature_sample_ratio,
                       num_trees, seed};
  }

  Date effective_run_date() const {
    if (run_date) return *run_date;
    return Date(std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now()));
  }
};

/// Command-line overrides; set fields replace the config's values.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> sample_rows;
  std::optional<std::size_t> num_trees;
  std::optional<double> min_leaf_pct;
  std::optional<double> feature_sample_ratio;
  std::optional<InputFormat> format;
  std::optional<Date> run_date;
  std::optional<double> min_score;

  void apply(DiagnoseConfig& c) const {
    if (seed) c.seed = *seed;
    if (sample_rows) c.sample_rows = *sample_rows;
    if (num_trees) c.num_trees = *num_trees;
    if (min_leaf_pct) c.min_leaf_pct = *min_leaf_pct;
    if (feature_sample_ratio) c.feature_sample_ratio = *feature_sample_ratio;
    if (format) c.format = *format;
    if (run_date) c.run_date = *run_date;
    if (min_score) c.min_score = *min_score;
    c.validate();
  }
};

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

namespace detail {

template <typename Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw StageError(stage, e.what(), true);
  } catch (const std::exception& e) {
    throw StageError(stage, e.what(), false);
  }
}

}  // namespace detail

struct PreparedData {
  LogTable full;  // imputed, confirmed prunes marked Excluded
  std::vector<PruningRecommendation> recommendations;
  std::vector<std::string> excluded;
  std::size_t positive_count = 0;
  std::size_t negative_count = 0;
  LogTable sample;
};

inline LogTable ingest_stage(const std::filesystem::path& input, const DiagnoseConfig& cfg) {
  return detail::staged("ingest", [&] {
    auto format = cfg.format ? *cfg.format : format_from_path(input);
    return load(input, format, cfg.schema);
  });
}

/// impute + prune. Shared by training and extraction so both see the same
/// full table.
inline PreparedData clean_stage(const LogTable& raw, const DiagnoseConfig& cfg) {
  PreparedData p;
  p.full = detail::staged("impute", [&] { return impute(raw); });
  detail::staged("prune", [&] {
    p.recommendations = recommend_pruning(p.full, cfg.max_cardinality);
    p.excluded = cfg.prune;
    if (cfg.prune_recommended) {
      for (const auto& r : p.recommendations) {
        if (std::find(p.excluded.begin(), p.excluded.end(), r.attribute) == p.excluded.end()) {
          p.excluded.push_back(r.attribute);
        }
      }
    }
    p.full = exclude_columns(std::move(p.full), p.excluded);
    return 0;
  });
  return p;
}

inline void sample_stage(PreparedData& p, const DiagnoseConfig& cfg) {
  detail::staged("stratify", [&] {
    auto labels = stratify_labels(p.full, cfg.schema.kpi);
    p.positive_count = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
    p.negative_count = labels.size() - p.positive_count;
    StratifiedTable s{p.full, std::move(labels), p.positive_count, p.negative_count};
    p.sample = detail::staged("sample", [&] {
      return sample(s, cfg.schema.kpi, cfg.sample_rows, cfg.seed);
    });
    return 0;
  });
}

inline ForestModel train_stage(const LogTable& sampled, const DiagnoseConfig& cfg,
                               unsigned threads = 0) {
  return detail::staged("train", [&] {
    TrainingTarget target;
    if (cfg.target_kind() == TargetKind::Classification) {
      target = TrainingTarget::classification(stratify_labels(sampled, cfg.schema.kpi));
    } else {
      target = TrainingTarget::regression(detail::kpi_values(sampled, cfg.schema.kpi));
    }
    auto data = TrainingData::build(sampled, sampled.feature_names(), std::move(target));
    return train(data, cfg.hyperparams(sampled.row_count()), threads);
  });
}

/// Rules from the model, negative forms dropped, one per key, floored and
/// annotated with impact on the full table. Ordered by key.
inline std::vector<Rule> extract_stage(const ForestModel& model, const LogTable& full,
                                       const DiagnoseConfig& cfg, const Date& as_of) {
  return detail::staged("extract", [&] {
    auto scoring = make_scoring_function(cfg.scoring);
    auto rules = extract_rules(model, scoring, as_of);
    rules = apply_score_floor(deduplicate(filter_negative(rules)), cfg.min_score);
    detail::staged("impact", [&] {
      annotate_impact(rules, full, cfg.schema.kpi);
      return 0;
    });
    return rules;
  });
}

struct TriageOutcome {
  Report report;
  bool attention = false;
};

/// Triages `rules` against the history at `history_path` (nullopt: no
/// history, cold start) and appends today's records to it.
inline TriageOutcome triage_stage(const std::vector<Rule>& rules,
                                  const std::optional<std::filesystem::path>& history_path,
                                  const DiagnoseConfig& cfg, const Date& today) {
  return detail::staged("triage", [&] {
    HistoryStore store = history_path ? HistoryStore::open(*history_path) : HistoryStore{};
    TriageOutcome out;
    out.report.run_date = today;
    out.report.kpi = cfg.schema.kpi.column;
    out.report.table_name = cfg.table_name;
    out.report.rules = triage(rules, store, today);
    out.report.resolved = detect_resolved(rules, store, today);
    out.attention = needs_attention(out.report);
    detail::staged("record", [&] {
      record_run(rules, store, today);
      return 0;
    });
    return out;
  });
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json pruning_json(const PreparedData& p, const DiagnoseConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["max_cardinality"] = cfg.max_cardinality;
  doc["recommendations"] = nlohmann::ordered_json::array();
  for (const auto& r : p.recommendations) {
    bool excluded = std::find(p.excluded.begin(), p.excluded.end(), r.attribute) != p.excluded.end();
    doc["recommendations"].push_back({{"attribute", r.attribute},
                                      {"cardinality", r.cardinality},
                                      {"reason", r.reason},
                                      {"excluded", excluded}});
  }
  doc["excluded"] = p.excluded;
  return doc;
}

inline nlohmann::json rules_document(const std::vector<Rule>& rules, const Date& as_of) {
  return nlohmann::json{{"as_of", as_of.to_string()}, {"rules", rules_to_json(rules)}};
}

inline std::vector<Rule> load_rules_document(const std::filesystem::path& path, Date* as_of = nullptr) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("rules file '" + path.string() + "': " + e.what(), 0);
  }
  if (as_of && doc.contains("as_of")) *as_of = Date::parse(doc.at("as_of").get<std::string>());
  return rules_from_json(doc.at("rules"));
}

inline void write_report_files(const Report& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "report.json", render(report, ReportFormat::Json));
  write_text_file(out_dir / "report.md", render(report, ReportFormat::Markdown));
}

// ---------------------------------------------------------------------------
// Whole pipeline
// ---------------------------------------------------------------------------

struct DiagnoseRequest {
  std::filesystem::path config_path;
  std::filesystem::path input_path;
  std::optional<std::filesystem::path> history_path;
  std::optional<std::filesystem::path> out_dir;
  ConfigOverrides overrides;
  unsigned threads = 0;
};

struct DiagnoseResult {
  Report report;
  bool attention = false;
  ForestModel model;
  std::vector<Rule> rules;
  PreparedData prepared;
  std::map<std::string, double> stage_seconds;
};

inline DiagnoseResult diagnose(const LogTable& raw, const DiagnoseConfig& cfg,
                               const std::optional<std::filesystem::path>& history_path,
                               unsigned threads = 0) {
  using Clock = std::chrono::steady_clock;
  DiagnoseResult res;
  auto timed = [&](const char* name, auto&& fn) {
    auto t0 = Clock::now();
    fn();
    res.stage_seconds[name] += std::chrono::duration<double>(Clock::now() - t0).count();
  };
  Date today = cfg.effective_run_date();
  timed("prepare", [&] {
    res.prepared = clean_stage(raw, cfg);
    sample_stage(res.prepared, cfg);
  });
  timed("train", [&] { res.model = train_stage(res.prepared.sample, cfg, threads); });
  timed("extract", [&] { res.rules = extract_stage(res.model, res.prepared.full, cfg, today); });
  timed("triage", [&] {
    auto outcome = triage_stage(res.rules, history_path, cfg, today);
    res.report = std::move(outcome.report);
    res.attention = outcome.attention;
  });
  return res;
}

/// Loads config and input, runs the pipeline and writes report.json,
/// report.md, pruning.json and model.txt to `out_dir` when given.
inline DiagnoseResult diagnose(const DiagnoseRequest& req) {
  DiagnoseConfig cfg = detail::staged("config", [&] {
    auto c = DiagnoseConfig::load(req.config_path);
    req.overrides.apply(c);
    return c;
  });
  auto t0 = std::chrono::steady_clock::now();
  LogTable raw = ingest_stage(req.input_path, cfg);
  double ingest_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto res = diagnose(raw, cfg, req.history_path, req.threads);
  res.stage_seconds["ingest"] = ingest_s;
  if (req.out_dir) {
    detail::staged("report", [&] {
      write_report_files(res.report, *req.out_dir);
      write_text_file(*req.out_dir / "pruning.json", pruning_json(res.prepared, cfg).dump(2) + "\n");
      write_text_file(*req.out_dir / "model.txt", dump_text(res.model));
      return 0;
    });
  }
  return res;
}

/// Exit status: 0 when no rule is New or Regressed, 2 when one is, 1 on
/// error (reported on `err`).
inline int run_diagnose(const DiagnoseRequest& req, std::ostream& err) {
  try {
    return diagnose(req).attention ? 2 : 0;
  } catch (const StageError& e) {
    err << (e.is_config_error() ? "config error: " : "error: ") << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return 1;
}

}  // namespace kpitriage

#endif  // KPITRIAGE_PIPELINE_HPP_
