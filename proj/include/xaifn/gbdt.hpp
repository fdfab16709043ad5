#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "xaifn/common.hpp"

namespace xaifn {

struct GbdtConfig {
  int n_trees = 60;
  int max_depth = 4;
  double learning_rate = 0.15;
  int min_samples_leaf = 4;
  int max_bins = 32;
  double l2 = 1.0;
};

/// Least-squares gradient-boosted regression trees with histogram splits.
class GradientBoostedTrees {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // x < threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  GradientBoostedTrees() = default;
  explicit GradientBoostedTrees(GbdtConfig config) : config_(config) {}

  /// Rows are samples. Fits `config.n_trees` trees to the targets.
  void fit(const std::vector<std::vector<double>>& rows, std::span<const double> targets);

  double predict(std::span<const double> row) const;
  /// Prediction using only the first `n_trees` trees (0 gives the base score).
  double predict_prefix(std::span<const double> row, std::size_t n_trees) const;

  double base_score() const { return base_score_; }
  std::size_t tree_count() const { return trees_.size(); }
  const std::vector<Tree>& trees() const { return trees_; }
  std::size_t feature_count() const { return feature_count_; }
  /// Features that appear in at least one split.
  std::set<int> features_used() const;
  const GbdtConfig& config() const { return config_; }

  json to_json() const;
  static GradientBoostedTrees from_json(const json& j);

 private:
  GbdtConfig config_;
  double base_score_ = 0.0;
  std::size_t feature_count_ = 0;
  std::vector<Tree> trees_;
};

}  // namespace xaifn
