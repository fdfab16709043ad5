#include "xaifn/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xaifn {

namespace {

struct Binned {
  std::size_t n = 0;
  std::size_t features = 0;
  std::vector<std::uint8_t> bins;              // feature-major: bins[f * n + i]
  std::vector<std::vector<double>> thresholds;  // thresholds[f][k] separates bin k | k+1
};

Binned bin_features(const std::vector<std::vector<double>>& rows, int max_bins) {
  Binned b;
  b.n = rows.size();
  b.features = rows.front().size();
  b.bins.assign(b.n * b.features, 0);
  b.thresholds.resize(b.features);
  std::vector<double> column(b.n);
  for (std::size_t f = 0; f < b.features; ++f) {
    for (std::size_t i = 0; i < b.n; ++i) column[i] = rows[i][f];
    std::vector<double> sorted = column;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    auto& thr = b.thresholds[f];
    if (sorted.size() <= static_cast<std::size_t>(max_bins)) {
      for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        thr.push_back(0.5 * (sorted[k] + sorted[k + 1]));
      }
    } else {
      std::vector<double> all = column;
      std::sort(all.begin(), all.end());
      for (int k = 1; k < max_bins; ++k) {
        const std::size_t at = all.size() * static_cast<std::size_t>(k) /
                               static_cast<std::size_t>(max_bins);
        const double lo = all[at - 1];
        const double hi = all[at];
        if (hi > lo && (thr.empty() || 0.5 * (lo + hi) > thr.back())) {
          thr.push_back(0.5 * (lo + hi));
        }
      }
    }
    for (std::size_t i = 0; i < b.n; ++i) {
      const auto it = std::upper_bound(thr.begin(), thr.end(), column[i]);
      b.bins[f * b.n + i] = static_cast<std::uint8_t>(it - thr.begin());
    }
  }
  return b;
}

class TreeBuilder {
 public:
  TreeBuilder(const Binned& data, const std::vector<double>& residual, const GbdtConfig& cfg)
      : data_(data), residual_(residual), cfg_(cfg) {}

  GradientBoostedTrees::Tree build() {
    std::vector<std::uint32_t> all(data_.n);
    std::iota(all.begin(), all.end(), 0u);
    tree_.clear();
    grow(all, 0);
    return std::move(tree_);
  }

 private:
  int grow(const std::vector<std::uint32_t>& samples, int depth) {
    double total = 0.0;
    for (auto i : samples) total += residual_[i];
    const double count = static_cast<double>(samples.size());
    const int id = static_cast<int>(tree_.size());
    tree_.push_back({});
    tree_[static_cast<std::size_t>(id)].value = cfg_.learning_rate * total / (count + cfg_.l2);
    if (depth >= cfg_.max_depth ||
        samples.size() < 2 * static_cast<std::size_t>(cfg_.min_samples_leaf)) {
      return id;
    }

    const double parent = total * total / (count + cfg_.l2);
    double best_gain = 1e-12;
    int best_feature = -1;
    int best_bin = -1;
    std::vector<double> sum(static_cast<std::size_t>(cfg_.max_bins) + 1);
    std::vector<std::uint32_t> cnt(sum.size());
    for (std::size_t f = 0; f < data_.features; ++f) {
      const auto& thr = data_.thresholds[f];
      if (thr.empty()) continue;
      const std::size_t nb = thr.size() + 1;
      std::fill(sum.begin(), sum.begin() + static_cast<std::ptrdiff_t>(nb), 0.0);
      std::fill(cnt.begin(), cnt.begin() + static_cast<std::ptrdiff_t>(nb), 0u);
      const std::uint8_t* col = data_.bins.data() + f * data_.n;
      for (auto i : samples) {
        sum[col[i]] += residual_[i];
        ++cnt[col[i]];
      }
      double left_sum = 0.0;
      std::uint32_t left_cnt = 0;
      for (std::size_t k = 0; k + 1 < nb; ++k) {
        left_sum += sum[k];
        left_cnt += cnt[k];
        const std::uint32_t right_cnt = static_cast<std::uint32_t>(samples.size()) - left_cnt;
        if (left_cnt < static_cast<std::uint32_t>(cfg_.min_samples_leaf) ||
            right_cnt < static_cast<std::uint32_t>(cfg_.min_samples_leaf)) {
          continue;
        }
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / (left_cnt + cfg_.l2) +
                            right_sum * right_sum / (right_cnt + cfg_.l2) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_bin = static_cast<int>(k);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::uint32_t> left, right;
    const std::uint8_t* col = data_.bins.data() + static_cast<std::size_t>(best_feature) * data_.n;
    for (auto i : samples) {
      (col[i] <= best_bin ? left : right).push_back(i);
    }
    tree_[static_cast<std::size_t>(id)].feature = best_feature;
    tree_[static_cast<std::size_t>(id)].threshold =
        data_.thresholds[static_cast<std::size_t>(best_feature)][static_cast<std::size_t>(best_bin)];
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    tree_[static_cast<std::size_t>(id)].left = l;
    tree_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const Binned& data_;
  const std::vector<double>& residual_;
  const GbdtConfig& cfg_;
  GradientBoostedTrees::Tree tree_;
};

double eval_tree(const GradientBoostedTrees::Tree& tree, std::span<const double> row) {
  std::size_t at = 0;
  while (tree[at].feature >= 0) {
    at = static_cast<std::size_t>(row[static_cast<std::size_t>(tree[at].feature)] < tree[at].threshold
                                      ? tree[at].left
                                      : tree[at].right);
  }
  return tree[at].value;
}

}  // namespace

void GradientBoostedTrees::fit(const std::vector<std::vector<double>>& rows,
                               std::span<const double> targets) {
  if (rows.empty() || rows.size() != targets.size()) {
    throw Error("BAD_TRAINING_DATA", "gbdt needs equally many non-empty rows and targets");
  }
  if (config_.n_trees < 0 || config_.max_bins < 2 || config_.max_bins > 255) {
    throw Error("BAD_CONFIG", "invalid gbdt configuration");
  }
  feature_count_ = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != feature_count_) throw Error("BAD_TRAINING_DATA", "ragged feature rows");
  }
  const Binned binned = bin_features(rows, config_.max_bins);
  base_score_ = std::accumulate(targets.begin(), targets.end(), 0.0) /
                static_cast<double>(targets.size());
  std::vector<double> pred(rows.size(), base_score_);
  std::vector<double> residual(rows.size());
  trees_.clear();
  for (int t = 0; t < config_.n_trees; ++t) {
    for (std::size_t i = 0; i < rows.size(); ++i) residual[i] = targets[i] - pred[i];
    TreeBuilder builder(binned, residual, config_);
    trees_.push_back(builder.build());
    for (std::size_t i = 0; i < rows.size(); ++i) pred[i] += eval_tree(trees_.back(), rows[i]);
  }
}

double GradientBoostedTrees::predict(std::span<const double> row) const {
  return predict_prefix(row, trees_.size());
}

double GradientBoostedTrees::predict_prefix(std::span<const double> row, std::size_t n_trees) const {
  if (row.size() != feature_count_) throw Error("SHAPE", "feature row has wrong width");
  double out = base_score_;
  for (std::size_t t = 0; t < std::min(n_trees, trees_.size()); ++t) out += eval_tree(trees_[t], row);
  return out;
}

std::set<int> GradientBoostedTrees::features_used() const {
  std::set<int> used;
  for (const auto& tree : trees_) {
    for (const auto& node : tree) {
      if (node.feature >= 0) used.insert(node.feature);
    }
  }
  return used;
}

json GradientBoostedTrees::to_json() const {
  json trees = json::array();
  for (const auto& tree : trees_) {
    json nodes = json::array();
    for (const auto& n : tree) {
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    }
    trees.push_back(std::move(nodes));
  }
  return {{"config",
           {{"n_trees", config_.n_trees},
            {"max_depth", config_.max_depth},
            {"learning_rate", config_.learning_rate},
            {"min_samples_leaf", config_.min_samples_leaf},
            {"max_bins", config_.max_bins},
            {"l2", config_.l2}}},
          {"base_score", base_score_},
          {"feature_count", feature_count_},
          {"trees", std::move(trees)}};
}

GradientBoostedTrees GradientBoostedTrees::from_json(const json& j) {
  GbdtConfig cfg;
  const auto& c = j.at("config");
  cfg.n_trees = c.at("n_trees").get<int>();
  cfg.max_depth = c.at("max_depth").get<int>();
  cfg.learning_rate = c.at("learning_rate").get<double>();
  cfg.min_samples_leaf = c.at("min_samples_leaf").get<int>();
  cfg.max_bins = c.at("max_bins").get<int>();
  cfg.l2 = c.at("l2").get<double>();
  GradientBoostedTrees g(cfg);
  g.base_score_ = j.at("base_score").get<double>();
  g.feature_count_ = j.at("feature_count").get<std::size_t>();
  for (const auto& tree : j.at("trees")) {
    Tree t;
    for (const auto& n : tree) {
      t.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                   n.at(3).get<int>(), n.at(4).get<double>()});
    }
    g.trees_.push_back(std::move(t));
  }
  return g;
}

}  // namespace xaifn
