#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

#include "nidsrl/feature_codec.hpp"
#include "nidsrl/models/logistic.hpp"
#include "nidsrl/random.hpp"

namespace nidsrl::models {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1;
  int right = -1;
  double value = 0;

  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  bool operator==(const Tree&) const = default;
};

/// Quantile-binned view of a sparse design matrix. Each row stores only the
/// features whose bin differs from the bin of 0.0, so one-hot blocks cost a
/// single entry per row.
class BinnedData {
 public:
  struct Entry {
    std::uint32_t feature;
    std::uint32_t bin;
  };

  BinnedData(const SparseRows& x, int max_bins = 64) : n_rows_(static_cast<std::size_t>(x.rows())) {
    const auto d = static_cast<std::size_t>(x.cols());
    std::vector<std::vector<double>> values(d);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (SparseRows::InnerIterator it(x, i); it; ++it) {
        if (it.value() != 0.0) values[static_cast<std::size_t>(it.col())].push_back(it.value());
      }
    }
    thresholds_.resize(d);
    default_bin_.resize(d);
    hist_offset_.resize(d + 1);
    for (std::size_t j = 0; j < d; ++j) {
      auto& v = values[j];
      const std::size_t zeros = n_rows_ - v.size();
      std::sort(v.begin(), v.end());
      // distinct values with multiplicities, 0.0 included when present
      std::vector<std::pair<double, std::size_t>> distinct;
      if (zeros > 0) distinct.emplace_back(0.0, zeros);
      for (double val : v) {
        if (!distinct.empty() && distinct.back().first == val) {
          ++distinct.back().second;
        } else {
          distinct.emplace_back(val, 1);
        }
      }
      std::sort(distinct.begin(), distinct.end());
      auto& th = thresholds_[j];
      if (distinct.size() <= static_cast<std::size_t>(max_bins)) {
        for (std::size_t k = 0; k + 1 < distinct.size(); ++k) {
          th.push_back(0.5 * (distinct[k].first + distinct[k + 1].first));
        }
      } else {
        const double per_bin = static_cast<double>(n_rows_) / max_bins;
        double acc = 0;
        double next_cut = per_bin;
        for (std::size_t k = 0; k + 1 < distinct.size(); ++k) {
          acc += static_cast<double>(distinct[k].second);
          if (acc >= next_cut) {
            th.push_back(0.5 * (distinct[k].first + distinct[k + 1].first));
            while (next_cut <= acc) next_cut += per_bin;
          }
        }
      }
      default_bin_[j] = bin_of(j, 0.0);
      hist_offset_[j + 1] = hist_offset_[j] + th.size() + 1;
    }

    row_ptr_.assign(n_rows_ + 1, 0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (SparseRows::InnerIterator it(x, i); it; ++it) {
        const auto j = static_cast<std::size_t>(it.col());
        const std::uint32_t b = bin_of(j, it.value());
        if (b != default_bin_[j]) entries_.push_back({static_cast<std::uint32_t>(j), b});
      }
      row_ptr_[static_cast<std::size_t>(i) + 1] = entries_.size();
    }
  }

  std::size_t rows() const { return n_rows_; }
  std::size_t features() const { return thresholds_.size(); }
  std::size_t bins(std::size_t j) const { return thresholds_[j].size() + 1; }
  std::size_t hist_size() const { return hist_offset_.back(); }
  std::size_t hist_offset(std::size_t j) const { return hist_offset_[j]; }
  std::uint32_t default_bin(std::size_t j) const { return default_bin_[j]; }
  double threshold(std::size_t j, std::size_t bin) const { return thresholds_[j][bin]; }

  std::span<const Entry> row(std::size_t i) const {
    return {entries_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }

  std::uint32_t bin(std::size_t i, std::size_t j) const {
    for (const auto& e : row(i)) {
      if (e.feature == j) return e.bin;
    }
    return default_bin_[j];
  }

 private:
  std::uint32_t bin_of(std::size_t j, double v) const {
    const auto& th = thresholds_[j];
    return static_cast<std::uint32_t>(std::lower_bound(th.begin(), th.end(), v) - th.begin());
  }

  std::size_t n_rows_;
  std::vector<std::vector<double>> thresholds_;
  std::vector<std::uint32_t> default_bin_;
  std::vector<std::size_t> hist_offset_;
  std::vector<std::size_t> row_ptr_;
  std::vector<Entry> entries_;
};

/// Per-row statistics a split criterion consumes: a sample weight plus two
/// criterion-specific sums (positive weight for Gini; gradient and hessian
/// for second-order boosting).
struct SplitStats {
  double count = 0;
  double a = 0;
  double b = 0;

  SplitStats& operator+=(const SplitStats& o) {
    count += o.count;
    a += o.a;
    b += o.b;
    return *this;
  }
  SplitStats operator-(const SplitStats& o) const { return {count - o.count, a - o.a, b - o.b}; }
};

struct GiniCriterion {
  static double score(const SplitStats& s) {
    // n * (1 - gini) = (pos^2 + neg^2) / n ; larger is purer
    if (s.count <= 0) return 0;
    const double neg = s.count - s.a;
    return (s.a * s.a + neg * neg) / s.count;
  }
  static double leaf(const SplitStats& s) { return s.count > 0 ? s.a / s.count : 0.0; }
  static bool child_ok(const SplitStats& s, double min_leaf) { return s.count >= min_leaf; }
  double lambda = 0;
};

struct NewtonCriterion {
  double lambda = 1.0;
  double min_child_weight = 1.0;
  double score(const SplitStats& s) const { return s.a * s.a / (s.b + lambda); }
  double leaf(const SplitStats& s) const { return -s.a / (s.b + lambda); }
  bool child_ok(const SplitStats& s, double min_leaf) const {
    return s.count >= min_leaf && s.b >= min_child_weight;
  }
};

struct TreeOptions {
  int max_depth = 12;
  double min_samples_leaf = 1;
  std::size_t max_features = 0;  // 0: all features
};

/// Depth-first CART growth over binned data. `rows` may repeat indices
/// (bootstrap); `stats[i]` holds row i's statistics. On return, `leaf_of`
/// (if non-null) maps each position in `rows` to the node it landed in.
template <typename Criterion>
class TreeBuilder {
 public:
  TreeBuilder(const BinnedData& data, const std::vector<SplitStats>& stats, const Criterion& crit,
              const TreeOptions& opt, Rng& rng)
      : data_(data), stats_(stats), crit_(crit), opt_(opt), rng_(rng), hist_(data.hist_size()) {
    feature_order_.resize(data.features());
    std::iota(feature_order_.begin(), feature_order_.end(), std::size_t{0});
  }

  Tree build(std::vector<std::size_t>& rows, std::vector<int>* leaf_node_of_position = nullptr) {
    Tree t;
    positions_leaf_.assign(rows.size(), -1);
    grow(t, rows, 0, rows.size(), 0);
    if (leaf_node_of_position) *leaf_node_of_position = positions_leaf_;
    return t;
  }

 private:
  struct Split {
    double gain = 0;
    std::size_t feature = 0;
    std::size_t bin = 0;
  };

  int grow(Tree& t, std::vector<std::size_t>& rows, std::size_t begin, std::size_t end, int depth) {
    SplitStats total;
    for (std::size_t k = begin; k < end; ++k) total += stats_[rows[k]];
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.push_back({});
    t.nodes.back().value = crit_.leaf(total);

    Split best;
    if (depth < opt_.max_depth && total.count >= 2 * opt_.min_samples_leaf) best = find_split(rows, begin, end, total);
    if (best.gain <= 1e-12) {
      for (std::size_t k = begin; k < end; ++k) positions_leaf_[k] = id;
      return id;
    }

    const auto mid_it = std::stable_partition(
        rows.begin() + static_cast<std::ptrdiff_t>(begin), rows.begin() + static_cast<std::ptrdiff_t>(end),
        [&](std::size_t r) { return data_.bin(r, best.feature) <= best.bin; });
    // positions_leaf_ is indexed by position, so partitioning keeps it consistent
    const auto mid = static_cast<std::size_t>(mid_it - rows.begin());
    t.nodes[static_cast<std::size_t>(id)].feature = static_cast<int>(best.feature);
    t.nodes[static_cast<std::size_t>(id)].threshold = data_.threshold(best.feature, best.bin);
    const int l = grow(t, rows, begin, mid, depth + 1);
    const int r = grow(t, rows, mid, end, depth + 1);
    t.nodes[static_cast<std::size_t>(id)].left = l;
    t.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  Split find_split(const std::vector<std::size_t>& rows, std::size_t begin, std::size_t end,
                   const SplitStats& total) {
    std::fill(hist_.begin(), hist_.end(), SplitStats{});
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t r = rows[k];
      for (const auto& e : data_.row(r)) hist_[data_.hist_offset(e.feature) + e.bin] += stats_[r];
    }
    const double parent = crit_.score(total);
    Split best;

    const std::size_t d = data_.features();
    const bool sample = opt_.max_features > 0 && opt_.max_features < d;
    std::size_t evaluated = 0;
    for (std::size_t k = 0; k < d; ++k) {
      std::size_t j = k;
      if (sample) {
        if (evaluated >= opt_.max_features) break;
        const std::size_t pick = k + uniform_index(rng_, d - k);
        std::swap(feature_order_[k], feature_order_[pick]);
        j = feature_order_[k];
      }
      const std::size_t off = data_.hist_offset(j);
      const std::size_t nb = data_.bins(j);
      // fill the default bin by subtraction
      SplitStats others;
      for (std::size_t b = 0; b < nb; ++b) {
        if (b != data_.default_bin(j)) others += hist_[off + b];
      }
      hist_[off + data_.default_bin(j)] = total - others;

      std::size_t occupied = 0;
      for (std::size_t b = 0; b < nb; ++b) occupied += hist_[off + b].count > 0;
      if (occupied < 2) continue;  // constant in this node; does not count toward max_features
      ++evaluated;

      SplitStats left;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        left += hist_[off + b];
        const SplitStats right = total - left;
        if (!crit_.child_ok(left, opt_.min_samples_leaf) || !crit_.child_ok(right, opt_.min_samples_leaf)) {
          continue;
        }
        const double gain = crit_.score(left) + crit_.score(right) - parent;
        if (gain > best.gain + 1e-12) best = {gain, j, b};
      }
    }
    return best;
  }

  const BinnedData& data_;
  const std::vector<SplitStats>& stats_;
  Criterion crit_;
  TreeOptions opt_;
  Rng& rng_;
  std::vector<SplitStats> hist_;
  std::vector<std::size_t> feature_order_;
  std::vector<int> positions_leaf_;
};

struct ForestOptions {
  int n_trees = 100;
  int max_depth = 12;
  double min_samples_leaf = 1;
  std::size_t max_features = 0;  // 0: sqrt(d)
  int threads = 1;
};

/// Bagged Gini trees; leaves hold the malicious fraction of their bootstrap sample.
inline std::vector<Tree> fit_random_forest(const BinnedData& data, const std::vector<int>& y,
                                           const ForestOptions& opt, std::uint64_t seed) {
  std::vector<SplitStats> stats(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) stats[i] = {1.0, static_cast<double>(y[i]), 0.0};
  TreeOptions topt;
  topt.max_depth = opt.max_depth;
  topt.min_samples_leaf = opt.min_samples_leaf;
  topt.max_features = opt.max_features ? opt.max_features
                                       : static_cast<std::size_t>(std::max(1.0, std::sqrt(static_cast<double>(data.features()))));
  std::vector<Tree> trees(static_cast<std::size_t>(opt.n_trees));
  auto grow_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t t = lo; t < hi; ++t) {
      Rng rng(derive_seed(seed, t));
      std::vector<std::size_t> rows(data.rows());
      for (auto& r : rows) r = uniform_index(rng, data.rows());
      std::sort(rows.begin(), rows.end());
      TreeBuilder<GiniCriterion> builder(data, stats, GiniCriterion{}, topt, rng);
      trees[t] = builder.build(rows);
    }
  };
  const std::size_t workers = static_cast<std::size_t>(std::max(1, opt.threads));
  if (workers == 1) {
    grow_range(0, trees.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (trees.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(trees.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(grow_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return trees;
}

struct BoostingOptions {
  int n_stages = 100;
  int max_depth = 6;
  double learning_rate = 0.1;
  double lambda = 1.0;
  double min_child_weight = 1.0;
};

struct BoostedTrees {
  double base_score = 0;  // logit offset
  std::vector<Tree> trees;
  std::vector<double> train_loss;  // mean training loss after each stage (index 0: base only)
};

/// Stagewise Newton boosting on the logistic loss. Each stage's leaf values
/// are halved until the training loss does not increase, so the recorded
/// loss sequence is non-increasing.
inline BoostedTrees fit_boosted_trees(const BinnedData& data, const std::vector<int>& y,
                                      const BoostingOptions& opt, std::uint64_t seed) {
  const std::size_t n = y.size();
  BoostedTrees model;
  const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double prior = std::clamp(pos / static_cast<double>(n), 1e-6, 1 - 1e-6);
  model.base_score = std::log(prior / (1 - prior));
  std::vector<double> margin(n, model.base_score);
  auto mean_loss = [&](const std::vector<double>& m) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += logistic_loss(m[i], y[i]);
    return s / static_cast<double>(n);
  };
  double loss = mean_loss(margin);
  model.train_loss.push_back(loss);

  NewtonCriterion crit{opt.lambda, opt.min_child_weight};
  TreeOptions topt;
  topt.max_depth = opt.max_depth;
  topt.min_samples_leaf = 1;
  Rng rng(derive_seed(seed, 7));
  std::vector<SplitStats> stats(n);
  std::vector<double> candidate(n);
  for (int stage = 0; stage < opt.n_stages; ++stage) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      stats[i] = {1.0, p - y[i], std::max(p * (1 - p), 1e-16)};
    }
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::vector<int> leaf_of;
    TreeBuilder<NewtonCriterion> builder(data, stats, crit, topt, rng);
    Tree tree = builder.build(rows, &leaf_of);
    for (auto& node : tree.nodes) node.value *= opt.learning_rate;

    double scale = 1.0;
    double new_loss = loss;
    for (int attempt = 0; attempt < 30; ++attempt) {
      for (std::size_t k = 0; k < n; ++k) {
        candidate[rows[k]] = margin[rows[k]] + scale * tree.nodes[static_cast<std::size_t>(leaf_of[k])].value;
      }
      new_loss = mean_loss(candidate);
      if (new_loss <= loss) break;
      scale *= 0.5;
    }
    if (new_loss > loss) {
      scale = 0;
      new_loss = loss;
      candidate = margin;
    }
    for (auto& node : tree.nodes) node.value *= scale;
    margin.swap(candidate);
    loss = new_loss;
    model.trees.push_back(std::move(tree));
    model.train_loss.push_back(loss);
  }
  return model;
}

}  // namespace nidsrl::models
