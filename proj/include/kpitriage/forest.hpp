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

// Random forests of CART trees (classification by information gain,
// regression by MSE reduction) plus a readable text dump of trained models.
//
// Splits are binary: `attr = value` for categorical features and
// `attr > threshold` for continuous ones, with the predicate-true branch on
// the left. Each tree grows greedily on a per-tree random subset of the
// features; there is no row bootstrap. Every feature is binned once per
// training run:
//
//   * categorical: one bin per category;
//   * continuous with at most kExactThresholdLimit distinct values: one bin
//     per distinct value, thresholds at midpoints of neighbouring values
//     present in the node;
//   * continuous with more distinct values: kQuantileBins equi-frequency
//     bins, thresholds at the bin edges.
//
// Split search then runs on per-node bin histograms.

#ifndef KPITRIAGE_FOREST_HPP_
#define KPITRIAGE_FOREST_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "kpitriage/core.hpp"
#include "kpitriage/table.hpp"

namespace kpitriage {

inline constexpr std::size_t kExactThresholdLimit = 10'000;
inline constexpr std::size_t kQuantileBins = 256;

enum class TargetKind { Classification, Regression };

inline std::string_view to_string(TargetKind k) {
  return k == TargetKind::Classification ? "Classification" : "Regression";
}

struct Hyperparams {
  std::size_t min_rows_in_leaf = 1;
  double feature_sample_ratio = 0.6;
  std::size_t num_trees = 50;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (min_rows_in_leaf < 1) throw ConfigError("min_rows_in_leaf must be >= 1");
    if (!(feature_sample_ratio > 0.0 && feature_sample_ratio <= 1.0)) {
      throw ConfigError("feature_sample_ratio must lie in (0, 1]");
    }
    if (num_trees < 1) throw ConfigError("num_trees must be >= 1");
  }

  bool operator==(const Hyperparams&) const = default;
};

/// Node of a trained tree. `left` holds the rows where `split` is true.
/// `metric` is the positive-class probability for classification trees and
/// the mean target for regression trees.
struct TreeNode {
  std::optional<Predicate> split;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::size_t row_count = 0;
  double metric = 0.0;

  bool is_leaf() const { return !split.has_value(); }
  bool operator==(const TreeNode&) const = default;
};

/// Flat tree; nodes[0] is the root, children are referenced by index.
struct Tree {
  std::vector<TreeNode> nodes;

  const TreeNode& root() const { return nodes.front(); }
  const TreeNode& left(const TreeNode& n) const { return nodes[static_cast<std::size_t>(n.left)]; }
  const TreeNode& right(const TreeNode& n) const {
    return nodes[static_cast<std::size_t>(n.right)];
  }
  bool operator==(const Tree&) const = default;
};

struct ForestModel {
  std::vector<Tree> trees;
  TargetKind target_kind = TargetKind::Classification;
  Hyperparams hyperparams;
  std::vector<std::string> feature_list;

  bool operator==(const ForestModel&) const = default;
};

struct SplitCandidate {
  Predicate predicate;
  double gain = 0.0;
};

// ---------------------------------------------------------------------------
// Split criteria
// ---------------------------------------------------------------------------

/// Binary entropy in bits.
inline double entropy(double pos, double neg) {
  double n = pos + neg;
  if (!(n > 0.0)) throw DataError("entropy of an empty set");
  double h = 0.0;
  for (double c : {pos, neg}) {
    if (c > 0.0) {
      double p = c / n;
      h -= p * std::log2(p);
    }
  }
  return h;
}

/// Parent entropy minus the row-weighted child entropies; an empty branch
/// contributes nothing.
inline double information_gain_counts(double pos, double neg, double left_pos, double left_neg) {
  double n = pos + neg;
  double nl = left_pos + left_neg;
  double nr = n - nl;
  double gain = entropy(pos, neg);
  if (nl > 0.0) gain -= nl / n * entropy(left_pos, left_neg);
  if (nr > 0.0) gain -= nr / n * entropy(pos - left_pos, neg - left_neg);
  return gain;
}

/// MSE reduction from branch sums. Equivalent to
/// MSE(parent) - (nl/n) MSE(left) - (nr/n) MSE(right), each branch measured
/// against its own mean.
inline double mse_reduction_sums(double n, double sum, double nl, double left_sum) {
  double nr = n - nl;
  if (nl <= 0.0 || nr <= 0.0) return 0.0;
  double right_sum = sum - left_sum;
  return (left_sum * left_sum / nl + right_sum * right_sum / nr - sum * sum / n) / n;
}

/// Information gain of splitting `rows` by `p`; `labels[r]` is true for
/// positive rows.
inline double information_gain(const LogTable& table, std::span<const std::size_t> rows,
                               const std::vector<bool>& labels, const Predicate& p) {
  BoundPredicate test(p, table);
  double pos = 0, neg = 0, lpos = 0, lneg = 0;
  for (std::size_t r : rows) {
    bool y = labels[r];
    (y ? pos : neg) += 1;
    if (test(r)) (y ? lpos : lneg) += 1;
  }
  return information_gain_counts(pos, neg, lpos, lneg);
}

/// MSE reduction of splitting `rows` by `p`, computed directly from the
/// branch means.
inline double mse_reduction(const LogTable& table, std::span<const std::size_t> rows,
                            std::span<const double> targets, const Predicate& p) {
  if (rows.size() < 2) throw DataError("MSE reduction needs at least two rows");
  BoundPredicate test(p, table);
  auto mse = [&](const std::vector<double>& ys) {
    if (ys.empty()) return 0.0;
    double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    double acc = 0.0;
    for (double y : ys) acc += (y - mean) * (y - mean);
    return acc / static_cast<double>(ys.size());
  };
  std::vector<double> all, left, right;
  for (std::size_t r : rows) {
    all.push_back(targets[r]);
    (test(r) ? left : right).push_back(targets[r]);
  }
  double n = static_cast<double>(all.size());
  return mse(all) - static_cast<double>(left.size()) / n * mse(left) -
         static_cast<double>(right.size()) / n * mse(right);
}

// ---------------------------------------------------------------------------
// Training data
// ---------------------------------------------------------------------------

/// Target for training: 0/1 labels for classification, KPI values for
/// regression.
struct TrainingTarget {
  TargetKind kind = TargetKind::Classification;
  std::vector<double> values;

  static TrainingTarget classification(const std::vector<bool>& labels) {
    TrainingTarget t{TargetKind::Classification, {}};
    t.values.reserve(labels.size());
    for (bool b : labels) t.values.push_back(b ? 1.0 : 0.0);
    return t;
  }
  static TrainingTarget regression(std::vector<double> values) {
    return TrainingTarget{TargetKind::Regression, std::move(values)};
  }
};

/// One feature reduced to per-row bin codes.
struct BinnedFeature {
  std::string name;
  ColumnKind kind = ColumnKind::Categorical;
  std::vector<std::uint32_t> codes;
  std::vector<std::string> categories;  // categorical: bin -> category
  std::vector<double> values;           // exact continuous: bin -> value
  std::vector<double> edges;            // quantized continuous: edge between bin i and i+1
  std::size_t bin_count = 0;

  /// Threshold separating bin `low` from the next non-empty bin `high`.
  double threshold(std::uint32_t low, std::uint32_t high) const {
    if (!values.empty()) return values[low] + (values[high] - values[low]) / 2.0;
    return edges[high - 1];
  }
};

class TrainingData {
 public:
  /// Bins the named feature columns of `table`. The table must be imputed.
  static TrainingData build(const LogTable& table, const std::vector<std::string>& features,
                            TrainingTarget target) {
    if (target.values.size() != table.row_count()) {
      throw DataError("target has " + std::to_string(target.values.size()) + " values for " +
                      std::to_string(table.row_count()) + " rows");
    }
    TrainingData d;
    d.kind_ = target.kind;
    d.targets_ = std::move(target.values);
    d.row_count_ = table.row_count();
    for (const auto& name : features) d.features_.push_back(bin_column(table.column(name)));
    return d;
  }

  TargetKind kind() const { return kind_; }
  std::size_t row_count() const { return row_count_; }
  const std::vector<BinnedFeature>& features() const { return features_; }
  std::span<const double> targets() const { return targets_; }

  std::vector<std::string> feature_names() const {
    std::vector<std::string> out;
    for (const auto& f : features_) out.push_back(f.name);
    return out;
  }

 private:
  static BinnedFeature bin_column(const Column& col) {
    BinnedFeature f;
    f.name = col.name();
    f.kind = col.kind();
    const std::size_t n = col.size();
    f.codes.resize(n);
    if (col.is_categorical()) {
      f.categories = col.dictionary();
      f.bin_count = f.categories.size();
      for (std::size_t r = 0; r < n; ++r) {
        if (col.is_missing(r)) throw DataError("feature '" + f.name + "' has missing values");
        f.codes[r] = col.code(r);
      }
      return f;
    }
    std::vector<double> sorted(col.numbers().begin(), col.numbers().end());
    for (double v : sorted) {
      if (std::isnan(v)) throw DataError("feature '" + f.name + "' has missing values");
    }
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() <= kExactThresholdLimit) {
      f.values = distinct;
      f.bin_count = distinct.size();
      for (std::size_t r = 0; r < n; ++r) {
        auto it = std::lower_bound(distinct.begin(), distinct.end(), col.number(r));
        f.codes[r] = static_cast<std::uint32_t>(it - distinct.begin());
      }
      return f;
    }
    // Equi-frequency edges, each at the midpoint below the quantile value.
    for (std::size_t k = 1; k < kQuantileBins; ++k) {
      double v = sorted[k * n / kQuantileBins];
      auto it = std::lower_bound(distinct.begin(), distinct.end(), v);
      if (it == distinct.begin()) continue;
      double below = *(it - 1);
      double edge = below + (v - below) / 2.0;
      if (f.edges.empty() || edge > f.edges.back()) f.edges.push_back(edge);
    }
    f.bin_count = f.edges.size() + 1;
    for (std::size_t r = 0; r < n; ++r) {
      // bin = number of edges strictly below the value
      auto it = std::lower_bound(f.edges.begin(), f.edges.end(), col.number(r));
      f.codes[r] = static_cast<std::uint32_t>(it - f.edges.begin());
    }
    return f;
  }

  TargetKind kind_ = TargetKind::Classification;
  std::vector<double> targets_;
  std::vector<BinnedFeature> features_;
  std::size_t row_count_ = 0;
};

namespace detail {

struct BinStat {
  double count = 0.0;
  double sum = 0.0;
};

struct NodeStats {
  double count = 0.0;
  double sum = 0.0;    // positives, or shifted target sum
  double sumsq = 0.0;  // shifted target sum of squares (regression only)
};

/// Histogram over the bins of a feature subset, stored contiguously.
class Histogram {
 public:
  Histogram() = default;
  Histogram(const TrainingData& data, std::span<const std::size_t> features) {
    offsets_.reserve(features.size() + 1);
    std::size_t total = 0;
    for (std::size_t f : features) {
      offsets_.push_back(total);
      total += data.features()[f].bin_count;
    }
    offsets_.push_back(total);
    bins_.assign(total, BinStat{});
  }

  std::span<BinStat> feature(std::size_t slot) {
    return {bins_.data() + offsets_[slot], offsets_[slot + 1] - offsets_[slot]};
  }
  std::span<const BinStat> feature(std::size_t slot) const {
    return {bins_.data() + offsets_[slot], offsets_[slot + 1] - offsets_[slot]};
  }
  std::size_t bytes() const { return bins_.size() * sizeof(BinStat); }
  bool empty() const { return bins_.empty(); }

  void accumulate(const TrainingData& data, std::span<const std::size_t> features,
                  std::span<const std::uint32_t> rows, std::span<const double> shifted) {
    for (std::size_t slot = 0; slot < features.size(); ++slot) {
      const std::uint32_t* codes = data.features()[features[slot]].codes.data();
      BinStat* h = bins_.data() + offsets_[slot];
      for (std::uint32_t r : rows) {
        BinStat& b = h[codes[r]];
        b.count += 1.0;
        b.sum += shifted[r];
      }
    }
  }

  void subtract(const Histogram& other) {
    for (std::size_t i = 0; i < bins_.size(); ++i) {
      bins_[i].count -= other.bins_[i].count;
      bins_[i].sum -= other.bins_[i].sum;
    }
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<BinStat> bins_;
};

/// Winning split in bin terms. For categorical features the left branch is
/// the single bin `bin`; for continuous ones it is every bin >= `bin`.
struct BinSplit {
  std::size_t feature = 0;  // index into TrainingData::features()
  std::uint32_t bin = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

inline bool clearly_greater(double a, double b) {
  return a > b + 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

inline double split_gain(TargetKind kind, const NodeStats& node, double nl, double left_sum) {
  if (kind == TargetKind::Classification) {
    return information_gain_counts(node.sum, node.count - node.sum, left_sum, nl - left_sum);
  }
  return mse_reduction_sums(node.count, node.sum, nl, left_sum);
}

// Gains at or below this are treated as no improvement.
inline double min_gain(TargetKind kind, const NodeStats& node) {
  if (kind == TargetKind::Classification) return 1e-12;
  return 1e-12 * (node.count > 0 ? node.sumsq / node.count : 0.0) + 1e-300;
}

inline std::optional<BinSplit> best_bin_split(const TrainingData& data,
                                              std::span<const std::size_t> features,
                                              const Histogram& hist, const NodeStats& node,
                                              std::size_t min_rows) {
  const double min_leaf = static_cast<double>(min_rows);
  std::optional<BinSplit> best;
  // Lexicographic (attribute, value/threshold) order breaks gain ties.
  auto better_than_best = [&](double gain, std::size_t feature, std::uint32_t bin,
                              double threshold) {
    if (!best) return true;
    if (clearly_greater(gain, best->gain)) return true;
    if (clearly_greater(best->gain, gain)) return false;
    const auto& fa = data.features()[feature];
    const auto& fb = data.features()[best->feature];
    if (fa.name != fb.name) return fa.name < fb.name;
    if (fa.kind == ColumnKind::Categorical) return fa.categories[bin] < fa.categories[best->bin];
    return threshold < best->threshold;
  };
  const double floor = min_gain(data.kind(), node);
  for (std::size_t slot = 0; slot < features.size(); ++slot) {
    const std::size_t fi = features[slot];
    const BinnedFeature& f = data.features()[fi];
    auto bins = hist.feature(slot);
    if (f.kind == ColumnKind::Categorical) {
      for (std::uint32_t b = 0; b < bins.size(); ++b) {
        double nl = bins[b].count;
        if (nl < min_leaf || node.count - nl < min_leaf) continue;
        double gain = split_gain(data.kind(), node, nl, bins[b].sum);
        if (gain > floor && better_than_best(gain, fi, b, 0.0)) {
          best = BinSplit{fi, b, 0.0, gain};
        }
      }
      continue;
    }
    double low_count = 0.0, low_sum = 0.0;
    std::optional<std::uint32_t> prev;
    for (std::uint32_t b = 0; b < bins.size(); ++b) {
      if (bins[b].count <= 0.0) continue;
      if (prev) {
        double nl = node.count - low_count;  // rows above the threshold
        if (nl >= min_leaf && low_count >= min_leaf) {
          double gain = split_gain(data.kind(), node, nl, node.sum - low_sum);
          double t = f.threshold(*prev, b);
          if (gain > floor && better_than_best(gain, fi, b, t)) best = BinSplit{fi, b, t, gain};
        }
      }
      low_count += bins[b].count;
      low_sum += bins[b].sum;
      prev = b;
    }
  }
  return best;
}

inline Predicate to_predicate(const TrainingData& data, const BinSplit& s) {
  const BinnedFeature& f = data.features()[s.feature];
  if (f.kind == ColumnKind::Categorical) return Predicate::equals(f.name, f.categories[s.bin]);
  return Predicate::greater_than(f.name, s.threshold);
}

inline bool goes_left(const BinnedFeature& f, const BinSplit& s, std::uint32_t row) {
  std::uint32_t c = f.codes[row];
  return f.kind == ColumnKind::Categorical ? c == s.bin : c >= s.bin;
}

inline NodeStats node_stats(std::span<const std::uint32_t> rows, std::span<const double> shifted) {
  NodeStats s;
  for (std::uint32_t r : rows) {
    s.count += 1.0;
    s.sum += shifted[r];
    s.sumsq += shifted[r] * shifted[r];
  }
  return s;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Feature indices a tree may split on: ceil(ratio * |features|), sorted.
inline std::vector<std::size_t> feature_subset(std::size_t feature_count, double ratio,
                                               std::uint64_t tree_seed) {
  std::vector<std::size_t> all(feature_count);
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(feature_count) - 1e-9));
  k = std::clamp<std::size_t>(k, feature_count == 0 ? 0 : 1, feature_count);
  if (k == feature_count) return all;
  std::mt19937_64 rng(tree_seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, feature_count - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

// Histograms of pending siblings are kept up to this many bytes; beyond it
// they are rebuilt from the rows when the sibling is grown.
inline constexpr std::size_t kPendingHistogramBudget = std::size_t{256} << 20;

class TreeGrower {
 public:
  TreeGrower(const TrainingData& data, std::span<const double> shifted, double shift,
             std::size_t min_rows)
      : data_(data), shifted_(shifted), shift_(shift), min_rows_(min_rows) {}

  Tree grow(std::span<const std::size_t> features) {
    features_ = features;
    std::vector<std::uint32_t> rows(data_.row_count());
    std::iota(rows.begin(), rows.end(), std::uint32_t{0});
    Tree tree;
    struct Work {
      std::size_t node;
      std::size_t begin, end;
      NodeStats stats;
      Histogram hist;
    };
    std::vector<Work> stack;
    std::size_t pending_bytes = 0;

    NodeStats root_stats = node_stats(rows, shifted_);
    tree.nodes.push_back(make_node(root_stats));
    stack.push_back(Work{0, 0, rows.size(), root_stats, {}});
    std::vector<std::uint32_t> scratch;

    while (!stack.empty()) {
      Work w = std::move(stack.back());
      stack.pop_back();
      pending_bytes -= w.hist.bytes();
      std::span<std::uint32_t> node_rows(rows.data() + w.begin, w.end - w.begin);
      if (node_rows.size() < 2 * min_rows_) continue;
      if (w.hist.empty()) {
        w.hist = Histogram(data_, features_);
        w.hist.accumulate(data_, features_, node_rows, shifted_);
      }
      auto split = best_bin_split(data_, features_, w.hist, w.stats, min_rows_);
      if (!split) continue;

      // Stable partition: predicate-true rows first.
      const BinnedFeature& f = data_.features()[split->feature];
      scratch.clear();
      std::size_t write = 0;
      for (std::uint32_t r : node_rows) {
        if (goes_left(f, *split, r)) {
          node_rows[write++] = r;
        } else {
          scratch.push_back(r);
        }
      }
      std::copy(scratch.begin(), scratch.end(), node_rows.begin() + static_cast<std::ptrdiff_t>(write));
      std::span<const std::uint32_t> left_rows = node_rows.subspan(0, write);
      std::span<const std::uint32_t> right_rows = node_rows.subspan(write);

      NodeStats left_stats = node_stats(left_rows, shifted_);
      NodeStats right_stats = node_stats(right_rows, shifted_);
      auto left_index = tree.nodes.size();
      tree.nodes.push_back(make_node(left_stats));
      tree.nodes.push_back(make_node(right_stats));
      TreeNode& parent = tree.nodes[w.node];
      parent.split = to_predicate(data_, *split);
      parent.left = static_cast<std::int32_t>(left_index);
      parent.right = static_cast<std::int32_t>(left_index + 1);

      bool left_smaller = left_rows.size() <= right_rows.size();
      Histogram small(data_, features_);
      small.accumulate(data_, features_, left_smaller ? left_rows : right_rows, shifted_);
      Histogram& large = w.hist;
      large.subtract(small);

      Work left{left_index, w.begin, w.begin + write, left_stats, {}};
      Work right{left_index + 1, w.begin + write, w.end, right_stats, {}};
      (left_smaller ? left.hist : right.hist) = std::move(small);
      (left_smaller ? right.hist : left.hist) = std::move(large);
      // Right is grown after left; drop its histogram if memory is tight.
      if (pending_bytes + right.hist.bytes() > kPendingHistogramBudget) right.hist = Histogram();
      pending_bytes += right.hist.bytes() + left.hist.bytes();
      stack.push_back(std::move(right));
      stack.push_back(std::move(left));
    }
    return tree;
  }

 private:
  TreeNode make_node(const NodeStats& s) const {
    TreeNode n;
    n.row_count = static_cast<std::size_t>(s.count);
    double mean = s.count > 0 ? s.sum / s.count : 0.0;
    n.metric = data_.kind() == TargetKind::Classification ? mean : mean + shift_;
    return n;
  }

  const TrainingData& data_;
  std::span<const double> shifted_;
  double shift_;
  std::size_t min_rows_;
  std::span<const std::size_t> features_;
};

}  // namespace detail

/// Highest-gain split of `rows` over `features` (indices into
/// data.features()), or nullopt when no split has positive gain with both
/// children holding at least `min_rows_in_leaf` rows.
inline std::optional<SplitCandidate> best_split(const TrainingData& data,
                                                std::span<const std::size_t> rows,
                                                std::span<const std::size_t> features,
                                                std::size_t min_rows_in_leaf = 1) {
  if (rows.empty()) throw DataError("best_split on an empty node");
  std::vector<std::uint32_t> r32(rows.begin(), rows.end());
  std::vector<double> targets(data.targets().begin(), data.targets().end());
  detail::Histogram hist(data, features);
  hist.accumulate(data, features, r32, targets);
  auto stats = detail::node_stats(r32, targets);
  auto split = detail::best_bin_split(data, features, hist, stats, min_rows_in_leaf);
  if (!split) return std::nullopt;
  return SplitCandidate{detail::to_predicate(data, *split), split->gain};
}

/// Grows `h.num_trees` trees. Trees are independent and trained in parallel
/// across up to `threads` workers (0 = hardware concurrency); the result
/// does not depend on the thread count.
inline ForestModel train(const TrainingData& data, const Hyperparams& h, unsigned threads = 0) {
  h.validate();
  if (data.row_count() < 2) throw DataError("training needs at least two rows");
  auto targets = data.targets();
  double shift = 0.0;
  if (data.kind() == TargetKind::Classification) {
    double pos = std::accumulate(targets.begin(), targets.end(), 0.0);
    if (pos == 0.0 || pos == static_cast<double>(targets.size())) {
      throw DataError("nothing to diagnose: every row falls in one class");
    }
  } else {
    shift = std::accumulate(targets.begin(), targets.end(), 0.0) /
            static_cast<double>(targets.size());
  }
  std::vector<double> shifted(targets.begin(), targets.end());
  for (double& v : shifted) v -= shift;

  ForestModel model;
  model.target_kind = data.kind();
  model.hyperparams = h;
  model.feature_list = data.feature_names();
  model.trees.resize(h.num_trees);

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, h.num_trees));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](unsigned id) {
    try {
      detail::TreeGrower grower(data, shifted, shift, h.min_rows_in_leaf);
      for (std::size_t i = next++; i < h.num_trees; i = next++) {
        std::uint64_t tree_seed = detail::splitmix64(h.rng_seed ^ detail::splitmix64(i));
        auto subset = detail::feature_subset(data.features().size(), h.feature_sample_ratio,
                                             tree_seed);
        model.trees[i] = grower.grow(subset);
      }
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };
  if (threads <= 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return model;
}

/// Convenience overload: bins every Feature column of `table`.
inline ForestModel train(const LogTable& table, TrainingTarget target, const Hyperparams& h,
                         unsigned threads = 0) {
  return train(TrainingData::build(table, table.feature_names(), std::move(target)), h, threads);
}

// ---------------------------------------------------------------------------
// Text dump
// ---------------------------------------------------------------------------
//
//   # features<TAB>name<TAB>name...
//   # hyperparams num_trees=N feature_sample_ratio=R min_rows_in_leaf=M rng_seed=S
//   TREE <i> <Classification|Regression>
//   {indent}{split-or-LEAF}<TAB>{row_count}<TAB>{metric}
//
// Indent is two spaces per depth level; a split line is followed by its
// left subtree, then its right subtree. Splits read `attr:value` or
// `attr > threshold`. Attribute names escape backslash, tab, newline, CR,
// space, ':', '>' and '#'; category values escape backslash, tab, newline
// and CR. The two '#' header lines are optional when parsing.

namespace detail {

inline std::string escape(std::string_view s, bool attribute) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case ' ': out += attribute ? "\\s" : " "; break;
      case ':':
      case '>':
      case '#':
        if (attribute) out += '\\';
        out += c;
        break;
      default: out += c;
    }
  }
  return out;
}

inline std::string unescape(std::string_view s, std::size_t line) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) throw ParseError("dangling escape", line);
    switch (s[i]) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case 's': out += ' '; break;
      default: out += s[i];
    }
  }
  return out;
}

inline std::string dump_split(const Predicate& p) {
  if (p.is_equals()) return escape(p.attribute, true) + ":" + escape(p.category(), false);
  return escape(p.attribute, true) + " > " + format_number(p.threshold());
}

inline Predicate parse_split(std::string_view text, std::size_t line) {
  // First unescaped ':' or '>' ends the attribute.
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\') {
      ++i;
      continue;
    }
    if (text[i] == ':') {
      return Predicate::equals(unescape(text.substr(0, i), line),
                               unescape(text.substr(i + 1), line));
    }
    if (text[i] == '>') {
      if (i == 0 || text[i - 1] != ' ' || i + 1 >= text.size() || text[i + 1] != ' ') {
        throw ParseError("malformed threshold split '" + std::string(text) + "'", line);
      }
      auto t = parse_number(text.substr(i + 2));
      if (!t) throw ParseError("bad threshold in '" + std::string(text) + "'", line);
      return Predicate::greater_than(unescape(text.substr(0, i - 1), line), *t);
    }
  }
  throw ParseError("unrecognised split '" + std::string(text) + "'", line);
}

}  // namespace detail

inline std::string dump_text(const ForestModel& m) {
  std::ostringstream out;
  out << "# features";
  for (const auto& f : m.feature_list) out << '\t' << detail::escape(f, false);
  out << '\n';
  out << "# hyperparams num_trees=" << m.hyperparams.num_trees
      << " feature_sample_ratio=" << format_number(m.hyperparams.feature_sample_ratio)
      << " min_rows_in_leaf=" << m.hyperparams.min_rows_in_leaf
      << " rng_seed=" << m.hyperparams.rng_seed << '\n';
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    out << "TREE " << t << ' ' << to_string(m.target_kind) << '\n';
    const Tree& tree = m.trees[t];
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};  // node, depth
    while (!stack.empty()) {
      auto [i, depth] = stack.back();
      stack.pop_back();
      const TreeNode& n = tree.nodes[i];
      out << std::string(2 * depth, ' ')
          << (n.is_leaf() ? std::string("LEAF") : detail::dump_split(*n.split)) << '\t'
          << n.row_count << '\t' << format_number(n.metric) << '\n';
      if (!n.is_leaf()) {
        stack.emplace_back(static_cast<std::size_t>(n.right), depth + 1);
        stack.emplace_back(static_cast<std::size_t>(n.left), depth + 1);
      }
    }
  }
  return out.str();
}

inline ForestModel parse_text(std::string_view text) {
  struct Line {
    std::size_t number;
    std::size_t depth;
    std::string_view body;
  };
  ForestModel m;
  std::optional<Hyperparams> hyper;
  std::vector<std::vector<Line>> tree_lines;
  std::optional<TargetKind> kind;

  std::size_t pos = 0, number = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.starts_with("# features")) {
      std::string_view rest = line.substr(10);
      while (!rest.empty()) {
        if (rest.front() != '\t') throw ParseError("malformed feature list", number);
        rest.remove_prefix(1);
        auto tab = rest.find('\t');
        m.feature_list.push_back(detail::unescape(rest.substr(0, tab), number));
        rest = tab == std::string_view::npos ? std::string_view{} : rest.substr(tab);
      }
      continue;
    }
    if (line.starts_with("# hyperparams")) {
      Hyperparams h;
      std::istringstream fields{std::string(line.substr(13))};
      std::string kv;
      while (fields >> kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ParseError("malformed hyperparameter '" + kv + "'", number);
        std::string key = kv.substr(0, eq);
        auto val = parse_number(kv.substr(eq + 1));
        if (!val || *val < 0) throw ParseError("bad value for '" + key + "'", number);
        if (key == "num_trees") {
          h.num_trees = static_cast<std::size_t>(*val);
        } else if (key == "feature_sample_ratio") {
          h.feature_sample_ratio = *val;
        } else if (key == "min_rows_in_leaf") {
          h.min_rows_in_leaf = static_cast<std::size_t>(*val);
        } else if (key == "rng_seed") {
          h.rng_seed = std::stoull(kv.substr(eq + 1));
        } else {
          throw ParseError("unknown hyperparameter '" + key + "'", number);
        }
      }
      hyper = h;
      continue;
    }
    if (line.starts_with("#")) continue;
    if (line.starts_with("TREE ")) {
      std::istringstream header{std::string(line.substr(5))};
      std::size_t index = 0;
      std::string kind_text;
      if (!(header >> index >> kind_text) || index != tree_lines.size()) {
        throw ParseError("bad tree header '" + std::string(line) + "'", number);
      }
      TargetKind k;
      if (kind_text == "Classification") {
        k = TargetKind::Classification;
      } else if (kind_text == "Regression") {
        k = TargetKind::Regression;
      } else {
        throw ParseError("unknown tree kind '" + kind_text + "'", number);
      }
      if (kind && *kind != k) throw ParseError("mixed tree kinds in one forest", number);
      kind = k;
      tree_lines.emplace_back();
      continue;
    }
    if (tree_lines.empty()) throw ParseError("node line before any TREE header", number);
    std::size_t indent = line.find_first_not_of(' ');
    if (indent == std::string_view::npos || indent % 2 != 0) {
      throw ParseError("indent must be a multiple of two spaces", number);
    }
    tree_lines.back().push_back(Line{number, indent / 2, line.substr(indent)});
  }
  if (tree_lines.empty()) throw ParseError("empty forest: no TREE blocks", number);
  m.target_kind = *kind;

  for (const auto& lines : tree_lines) {
    if (lines.empty()) throw ParseError("tree without nodes", number);
    Tree tree;
    std::size_t cursor = 0;
    // Pre-order listing; children are allocated as a pair when their parent
    // is read, matching the numbering produced by training.
    auto parse_node = [&](auto& self, std::size_t slot, std::size_t depth) -> void {
      if (cursor >= lines.size()) {
        throw ParseError("tree ends before all children are listed", lines.back().number);
      }
      const Line& l = lines[cursor++];
      if (l.depth != depth) {
        throw ParseError("expected depth " + std::to_string(depth) + ", found " +
                             std::to_string(l.depth),
                         l.number);
      }
      auto tab1 = l.body.find('\t');
      auto tab2 = tab1 == std::string_view::npos ? tab1 : l.body.find('\t', tab1 + 1);
      if (tab2 == std::string_view::npos || l.body.find('\t', tab2 + 1) != std::string_view::npos) {
        throw ParseError("node line needs three tab-separated fields", l.number);
      }
      auto count = parse_number(l.body.substr(tab1 + 1, tab2 - tab1 - 1));
      auto metric = parse_number(l.body.substr(tab2 + 1));
      if (!count || *count < 0 || std::floor(*count) != *count) {
        throw ParseError("bad row count", l.number);
      }
      if (!metric) throw ParseError("bad metric", l.number);
      if (m.target_kind == TargetKind::Classification && (*metric < 0.0 || *metric > 1.0)) {
        throw ParseError("anomaly probability outside [0, 1]", l.number);
      }
      tree.nodes[slot].row_count = static_cast<std::size_t>(*count);
      tree.nodes[slot].metric = *metric;
      std::string_view split = l.body.substr(0, tab1);
      if (split == "LEAF") return;
      std::size_t left = tree.nodes.size();
      tree.nodes[slot].split = detail::parse_split(split, l.number);
      tree.nodes[slot].left = static_cast<std::int32_t>(left);
      tree.nodes[slot].right = static_cast<std::int32_t>(left + 1);
      tree.nodes.resize(left + 2);
      self(self, left, depth + 1);
      self(self, left + 1, depth + 1);
      if (tree.nodes[left].row_count + tree.nodes[left + 1].row_count !=
          tree.nodes[slot].row_count) {
        throw ParseError("child row counts do not sum to the parent's", l.number);
      }
    };
    tree.nodes.resize(1);
    parse_node(parse_node, 0, 0);
    if (cursor != lines.size()) throw ParseError("extra nodes after the root subtree", lines[cursor].number);
    m.trees.push_back(std::move(tree));
  }
  if (hyper) {
    if (hyper->num_trees != m.trees.size()) {
      throw ParseError("header declares " + std::to_string(hyper->num_trees) + " trees, found " +
                           std::to_string(m.trees.size()),
                       0);
    }
    m.hyperparams = *hyper;
  } else {
    m.hyperparams.num_trees = m.trees.size();
  }
  return m;
}

}  // namespace kpitriage

#endif  // KPITRIAGE_FOREST_HPP_
