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

// Rule mining over trained forests.
//
// Every split node yields a candidate rule. The node's two children are
// scored with a caller-supplied function of (row_count, metric); the
// predicate is oriented toward the worse-scoring child, so the correlation
// score (worse minus better) is never negative. Ancestor splits, oriented
// along the path taken, form the rule's scope.

#ifndef KPITRIAGE_RULES_HPP_
#define KPITRIAGE_RULES_HPP_

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kpitriage/core.hpp"
#include "kpitriage/forest.hpp"
#include "kpitriage/table.hpp"

namespace kpitriage {

using ScoringFunction = std::function<double(std::size_t row_count, double metric)>;

/// Latency-style score: total KPI mass in the node.
inline double orion_score(std::size_t row_count, double metric) {
  return static_cast<double>(row_count) * metric;
}

/// Failure-style score: the node's failure probability alone.
inline double domino_score(std::size_t /*row_count*/, double metric) { return metric; }

namespace detail {

// Recursive-descent parser for arithmetic over `row_count` and `metric`:
//   expr := term (('+'|'-') term)*
//   term := unary (('*'|'/') unary)*
//   unary := '-' unary | atom
//   atom := number | identifier | '(' expr ')'
class ScoreExpression {
 public:
  explicit ScoreExpression(std::string_view text) : text_(text) {
    root_ = parse_expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(text_.substr(pos_, 1)) + "'");
  }

  double operator()(std::size_t row_count, double metric) const {
    return eval(*root_, static_cast<double>(row_count), metric);
  }

 private:
  struct Node {
    char op;  // '+', '-', '*', '/', 'n' (negate), 'c' (constant), 'r' (row_count), 'm' (metric)
    double constant = 0.0;
    std::shared_ptr<const Node> lhs, rhs;
  };
  using NodePtr = std::shared_ptr<const Node>;

  static double eval(const Node& n, double rows, double metric) {
    switch (n.op) {
      case 'c': return n.constant;
      case 'r': return rows;
      case 'm': return metric;
      case 'n': return -eval(*n.lhs, rows, metric);
      case '+': return eval(*n.lhs, rows, metric) + eval(*n.rhs, rows, metric);
      case '-': return eval(*n.lhs, rows, metric) - eval(*n.rhs, rows, metric);
      case '*': return eval(*n.lhs, rows, metric) * eval(*n.rhs, rows, metric);
      case '/': return eval(*n.lhs, rows, metric) / eval(*n.rhs, rows, metric);
    }
    return 0.0;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("scoring expression '" + std::string(text_) + "': " + what);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr binary(char op, NodePtr lhs, NodePtr rhs) {
    return std::make_shared<const Node>(Node{op, 0.0, std::move(lhs), std::move(rhs)});
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = binary('+', lhs, parse_term());
      } else if (accept('-')) {
        lhs = binary('-', lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = binary('*', lhs, parse_unary());
      } else if (accept('/')) {
        lhs = binary('/', lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return binary('n', parse_unary(), nullptr);
    return parse_atom();
  }

  NodePtr parse_atom() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    if (accept('(')) {
      NodePtr inner = parse_expr();
      if (!accept(')')) fail("missing ')'");
      return inner;
    }
    char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
              ((text_[pos_] == '+' || text_[pos_] == '-') &&
               (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E')))) {
        ++pos_;
      }
      auto v = parse_number(text_.substr(start, pos_ - start));
      if (!v) fail("bad number '" + std::string(text_.substr(start, pos_ - start)) + "'");
      return std::make_shared<const Node>(Node{'c', *v, nullptr, nullptr});
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      std::string_view id = text_.substr(start, pos_ - start);
      if (id == "row_count" || id == "count" || id == "rows") {
        return std::make_shared<const Node>(Node{'r', 0.0, nullptr, nullptr});
      }
      if (id == "metric" || id == "predicted_value" || id == "probability" ||
          id == "failure_probability") {
        return std::make_shared<const Node>(Node{'m', 0.0, nullptr, nullptr});
      }
      fail("unknown variable '" + std::string(id) + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string text_;
  std::size_t pos_ = 0;
  NodePtr root_;
};

}  // namespace detail

/// "orion" (row_count * metric), "domino" (metric), or an arithmetic
/// expression over row_count and metric such as "row_count * metric / 1000".
inline ScoringFunction make_scoring_function(std::string_view spec) {
  if (spec == "orion") return orion_score;
  if (spec == "domino") return domino_score;
  return detail::ScoreExpression(spec);
}

inline double score_node(const ScoringFunction& f, const TreeNode& n) {
  return f(n.row_count, n.metric);
}

/// Score of the predicate-true child minus the predicate-false child.
inline double correlation_score(const ScoringFunction& f, const Tree& tree,
                                const TreeNode& split_node) {
  if (split_node.is_leaf()) throw std::logic_error("correlation_score on a leaf node");
  return score_node(f, tree.left(split_node)) - score_node(f, tree.right(split_node));
}

/// One rule per split node of every tree (see the file comment).
inline std::vector<Rule> extract_rules(const ForestModel& m, const ScoringFunction& f,
                                       Date as_of = {}) {
  std::vector<Rule> out;
  for (const Tree& tree : m.trees) {
    if (tree.nodes.empty()) continue;
    struct Frame {
      std::size_t node;
      std::vector<Predicate> scope;
    };
    std::vector<Frame> stack{{0, {}}};
    while (!stack.empty()) {
      Frame fr = std::move(stack.back());
      stack.pop_back();
      const TreeNode& n = tree.nodes[fr.node];
      if (n.is_leaf()) continue;
      const TreeNode& left = tree.left(n);
      const TreeNode& right = tree.right(n);
      double delta = score_node(f, left) - score_node(f, right);
      Rule r;
      r.as_of = as_of;
      r.scope_predicates = fr.scope;
      if (delta >= 0.0) {
        r.correlated_predicate = *n.split;
        r.correlation_score = delta;
        r.request_count = left.row_count;
      } else {
        r.correlated_predicate = flip_polarity(*n.split);
        r.correlation_score = -delta;
        r.request_count = right.row_count;
      }
      out.push_back(std::move(r));

      Frame right_frame{static_cast<std::size_t>(n.right), fr.scope};
      right_frame.scope.push_back(flip_polarity(*n.split));
      fr.scope.push_back(*n.split);
      stack.push_back(std::move(right_frame));
      stack.push_back(Frame{static_cast<std::size_t>(n.left), std::move(fr.scope)});
    }
  }
  return out;
}

inline std::string scope_text(const Rule& r) {
  std::string s;
  for (const auto& p : r.scope_predicates) {
    if (!s.empty()) s += " AND ";
    s += display(p);
  }
  return s;
}

/// Keeps, per canonical key of the correlated predicate, the rule with the
/// highest correlation score (then larger request_count, then the
/// lexicographically smaller scope). Output is ordered by key.
inline std::vector<Rule> deduplicate(const std::vector<Rule>& rules) {
  std::map<std::string, const Rule*> best;
  auto better = [](const Rule& a, const Rule& b) {
    if (a.correlation_score != b.correlation_score) return a.correlation_score > b.correlation_score;
    if (a.request_count != b.request_count) return a.request_count > b.request_count;
    return scope_text(a) < scope_text(b);
  };
  for (const auto& r : rules) {
    auto [it, inserted] = best.try_emplace(r.key(), &r);
    if (!inserted && better(r, *it->second)) it->second = &r;
  }
  std::vector<Rule> out;
  out.reserve(best.size());
  for (const auto& [key, r] : best) out.push_back(*r);
  return out;
}

/// Drops "anything but X" rules (equality tests that only hold when false)
/// and rules without a positive correlation score.
inline std::vector<Rule> filter_negative(const std::vector<Rule>& rules) {
  std::vector<Rule> out;
  for (const auto& r : rules) {
    if (r.correlated_predicate.is_equals() && !r.correlated_predicate.polarity) continue;
    if (!(r.correlation_score > 0.0)) continue;
    out.push_back(r);
  }
  return out;
}

/// Rules scoring below `floor` are dropped.
inline std::vector<Rule> apply_score_floor(const std::vector<Rule>& rules, double floor) {
  std::vector<Rule> out;
  for (const auto& r : rules) {
    if (r.correlation_score >= floor) out.push_back(r);
  }
  return out;
}

struct ImpactResult {
  std::optional<double> impact;  // nullopt when no row matches ("stale")
  std::size_t matched_rows = 0;
};

namespace detail {

// Per-row KPI value: the raw number for continuous KPIs, 1/0 for binary.
inline std::vector<double> kpi_values(const LogTable& table, const KpiSpec& kpi) {
  const Column& col = table.column(kpi.column);
  std::vector<double> out(table.row_count());
  if (kpi.kind == KpiKind::Continuous) {
    if (!col.is_continuous()) throw DataError("KPI column '" + kpi.column + "' is not numeric");
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = col.number(r);
  } else {
    if (!col.is_categorical()) throw DataError("KPI column '" + kpi.column + "' is not categorical");
    std::uint32_t positive = col.find_code(kpi.positive_label);
    for (std::size_t r = 0; r < out.size(); ++r) {
      out[r] = positive != Column::kMissingCode && col.code(r) == positive ? 1.0 : 0.0;
    }
  }
  return out;
}

inline ImpactResult impact_with(const Rule& rule, const LogTable& table,
                                const std::vector<double>& values, double global_mean) {
  std::vector<Predicate> conj = rule.scope_predicates;
  conj.push_back(rule.correlated_predicate);
  auto rows = matching_rows(table, conj);
  ImpactResult res;
  res.matched_rows = rows.size();
  if (rows.empty()) return res;
  double sum = 0.0;
  for (std::size_t r : rows) sum += values[r];
  res.impact = sum / static_cast<double>(rows.size()) - global_mean;
  return res;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Subset-vs-population KPI delta of the rows matching scope and correlated
/// predicate: difference of means for continuous KPIs, of positive rates for
/// binary ones.
inline ImpactResult compute_impact(const Rule& rule, const LogTable& table, const KpiSpec& kpi) {
  auto values = detail::kpi_values(table, kpi);
  return detail::impact_with(rule, table, values, detail::mean_of(values));
}

/// Fills performance_impact and full_request_count on every rule.
inline void annotate_impact(std::vector<Rule>& rules, const LogTable& table, const KpiSpec& kpi) {
  auto values = detail::kpi_values(table, kpi);
  double global = detail::mean_of(values);
  for (auto& r : rules) {
    auto res = detail::impact_with(r, table, values, global);
    r.performance_impact = res.impact;
    r.full_request_count = res.matched_rows;
  }
}

}  // namespace kpitriage

#endif  // KPITRIAGE_RULES_HPP_
