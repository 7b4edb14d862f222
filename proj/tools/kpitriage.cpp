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

// kpitriage command-line driver.
//
// Exit status: 0 = no New or Regressed rule, 2 = at least one, 1 = error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "kpitriage/kpitriage.hpp"

namespace fs = std::filesystem;
using namespace kpitriage;

namespace {

struct CommonFlags {
  std::string config;
  std::string input;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> sample_rows;
  std::optional<std::size_t> trees;
  std::optional<double> min_leaf_pct;
  std::optional<double> feature_ratio;
  std::optional<std::string> format;
  std::optional<std::string> date;
  std::optional<double> min_score;

  void add_to(CLI::App& app, bool needs_input = true) {
    app.add_option("--config", config, "JSON pipeline config")->required()->check(CLI::ExistingFile);
    if (needs_input) {
      app.add_option("--input", input, "log file (CSV or JSONL)")->required()->check(CLI::ExistingFile);
    }
    app.add_option("--seed", seed, "sampling and training seed");
    app.add_option("--sample-rows", sample_rows, "sample size in rows");
    app.add_option("--trees", trees, "number of trees");
    app.add_option("--min-leaf-pct", min_leaf_pct, "minimum leaf size, percent of the sample");
    app.add_option("--feature-ratio", feature_ratio, "per-tree feature sample ratio");
    app.add_option("--format", format, "input format: csv or jsonl (default: by extension)");
    app.add_option("--date", date, "run date YYYY-MM-DD (default: today)");
    app.add_option("--min-score", min_score, "drop rules scoring below this");
  }

  ConfigOverrides overrides() const {
    ConfigOverrides o;
    o.seed = seed;
    o.sample_rows = sample_rows;
    o.num_trees = trees;
    o.min_leaf_pct = min_leaf_pct;
    o.feature_sample_ratio = feature_ratio;
    if (format) o.format = parse_input_format(*format);
    if (date) o.run_date = Date::parse(*date);
    o.min_score = min_score;
    return o;
  }

  DiagnoseConfig load_config() const {
    return detail::staged("config", [&] {
      auto cfg = DiagnoseConfig::load(config);
      overrides().apply(cfg);
      return cfg;
    });
  }
};

std::optional<fs::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

int cmd_diagnose(const CommonFlags& flags, const std::string& history, const std::string& out) {
  DiagnoseRequest req;
  req.config_path = flags.config;
  req.input_path = flags.input;
  req.history_path = optional_path(history);
  req.out_dir = optional_path(out);
  req.overrides = flags.overrides();
  auto res = diagnose(req);
  if (!req.out_dir) std::cout << render(res.report, ReportFormat::Json);
  return res.attention ? 2 : 0;
}

int cmd_train(const CommonFlags& flags, const std::string& out) {
  auto cfg = flags.load_config();
  auto prepared = clean_stage(ingest_stage(flags.input, cfg), cfg);
  sample_stage(prepared, cfg);
  auto model = train_stage(prepared.sample, cfg);
  auto text = dump_text(model);
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text_file(out, text);
  }
  return 0;
}

int cmd_extract(const CommonFlags& flags, const std::string& model_path, const std::string& out) {
  auto cfg = flags.load_config();
  auto model = detail::staged("parse", [&] { return parse_text(read_file(model_path)); });
  auto prepared = clean_stage(ingest_stage(flags.input, cfg), cfg);
  Date today = cfg.effective_run_date();
  auto rules = extract_stage(model, prepared.full, cfg, today);
  auto text = rules_document(rules, today).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text_file(out, text);
  }
  return 0;
}

int cmd_triage(const CommonFlags& flags, const std::string& rules_path, const std::string& history,
               const std::string& out) {
  auto cfg = flags.load_config();
  Date as_of = cfg.effective_run_date();
  auto rules = detail::staged("load", [&] { return load_rules_document(rules_path, &as_of); });
  Date today = flags.date ? Date::parse(*flags.date) : as_of;
  auto outcome = triage_stage(rules, optional_path(history), cfg, today);
  if (out.empty()) {
    std::cout << render(outcome.report, ReportFormat::Json);
  } else {
    write_report_files(outcome.report, out);
  }
  return outcome.attention ? 2 : 0;
}

int cmd_generate(const std::string& config, const std::string& out, std::optional<std::string> date,
                 std::optional<std::uint64_t> seed, std::optional<std::size_t> rows) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(config));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generator config: ") + e.what());
  }
  auto cfg = GeneratorConfig::from_json(doc);
  if (seed) cfg.seed = *seed;
  if (rows) cfg.row_count = *rows;
  Date day = date ? Date::parse(*date)
                  : Date(std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now()));
  auto logs = generate(cfg, day);
  fs::create_directories(out);
  write_text_file(fs::path(out) / "logs.csv", to_csv(logs.table));
  write_text_file(fs::path(out) / "manifest.json", logs.manifest.to_json().dump(2) + "\n");
  auto pipeline = cfg.schema_json();
  pipeline["run_date"] = day.to_string();
  write_text_file(fs::path(out) / "config.json", pipeline.dump(2) + "\n");
  std::cout << "wrote " << logs.table.row_count() << " rows and " << logs.manifest.faults.size()
            << " active fault(s) to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& report_path, const std::string& manifest_path,
             const std::vector<std::string>& triage_filter) {
  auto report = nlohmann::json::parse(read_file(report_path));
  auto manifest = TruthManifest::from_json(nlohmann::json::parse(read_file(manifest_path)));
  std::vector<std::string> reported;
  for (const auto& r : report.at("rules")) {
    auto verdict = r.at("triage").get<std::string>();
    if (!triage_filter.empty() &&
        std::find(triage_filter.begin(), triage_filter.end(), verdict) == triage_filter.end()) {
      continue;
    }
    reported.push_back(r.at("key").get<std::string>());
  }
  auto res = precision(reported, manifest.keys());
  nlohmann::ordered_json out;
  out["precision"] = res.precision ? nlohmann::ordered_json(*res.precision) : nlohmann::ordered_json();
  out["valid_issue_count"] = res.valid_issue_count;
  out["true_positives"] = res.true_positives;
  out["false_positives"] = res.false_positives;
  out["missed"] = res.missed;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_dump_model(const std::string& model_path, std::optional<std::size_t> tree) {
  auto model = parse_text(read_file(model_path));
  if (tree) {
    if (*tree >= model.trees.size()) throw ConfigError("model has no tree " + std::to_string(*tree));
    ForestModel one = model;
    one.trees = {model.trees[*tree]};
    one.hyperparams.num_trees = 1;
    std::cout << dump_text(one);
  } else {
    std::cout << dump_text(model);
  }
  std::size_t nodes = 0;
  for (const auto& t : model.trees) nodes += t.nodes.size();
  std::cerr << model.trees.size() << " tree(s), " << nodes << " node(s), "
            << to_string(model.target_kind) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KPI regression diagnosis and triage"};
  app.require_subcommand(1);

  CommonFlags diag_flags, train_flags, extract_flags, triage_flags;
  std::string history, out, model_path, rules_path, report_path, manifest_path;

  auto* diag = app.add_subcommand("diagnose", "run the whole pipeline");
  diag_flags.add_to(*diag);
  diag->add_option("--history", history, "history file (created if absent)");
  diag->add_option("--out", out, "output directory for report.json, report.md, pruning.json, model.txt");

  auto* train_cmd = app.add_subcommand("train", "prepare the data and train the forest");
  train_flags.add_to(*train_cmd);
  train_cmd->add_option("--out", out, "model text file (default: stdout)");

  auto* extract_cmd = app.add_subcommand("extract", "extract rules from a trained model");
  extract_flags.add_to(*extract_cmd);
  extract_cmd->add_option("--model", model_path, "model text file")->required()->check(CLI::ExistingFile);
  extract_cmd->add_option("--out", out, "rules JSON file (default: stdout)");

  auto* triage_cmd = app.add_subcommand("triage", "triage extracted rules against history");
  triage_flags.add_to(*triage_cmd, false);
  triage_cmd->add_option("--rules", rules_path, "rules JSON file")->required()->check(CLI::ExistingFile);
  triage_cmd->add_option("--history", history, "history file (created if absent)");
  triage_cmd->add_option("--out", out, "output directory for report.json and report.md");

  std::string gen_config;
  std::optional<std::string> gen_date;
  std::optional<std::uint64_t> gen_seed;
  std::optional<std::size_t> gen_rows;
  auto* gen = app.add_subcommand("generate", "write synthetic logs with planted faults");
  gen->add_option("--config", gen_config, "generator config JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--date", gen_date, "day to generate, YYYY-MM-DD (default: today)");
  gen->add_option("--seed", gen_seed, "override the generator seed");
  gen->add_option("--rows", gen_rows, "override the row count");

  std::vector<std::string> eval_triage;
  auto* eval = app.add_subcommand("eval", "precision of a report against a truth manifest");
  eval->add_option("--report", report_path, "report.json")->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", manifest_path, "manifest.json")->required()->check(CLI::ExistingFile);
  eval->add_option("--triage", eval_triage, "count only rules with these verdicts");

  std::optional<std::size_t> tree_index;
  auto* dump = app.add_subcommand("dump-model", "validate and print a model text file");
  dump->add_option("--model", model_path, "model text file")->required()->check(CLI::ExistingFile);
  dump->add_option("--tree", tree_index, "print only this tree");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*diag) return cmd_diagnose(diag_flags, history, out);
    if (*train_cmd) return cmd_train(train_flags, out);
    if (*extract_cmd) return cmd_extract(extract_flags, model_path, out);
    if (*triage_cmd) return cmd_triage(triage_flags, rules_path, history, out);
    if (*gen) return cmd_generate(gen_config, out, gen_date, gen_seed, gen_rows);
    if (*eval) return cmd_eval(report_path, manifest_path, eval_triage);
    if (*dump) return cmd_dump_model(model_path, tree_index);
  } catch (const StageError& e) {
    std::cerr << (e.is_config_error() ? "config error: " : "error: ") << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
