#pragma once

#include "rovtl/tabular.hpp"

#include <cstdint>
#include <vector>

namespace rovtl::tabular {

enum class ImportanceTask { classification, regression };

struct ForestOptions {
  int trees = 100;
  int max_depth = 16;
  int min_samples_leaf = 1;
  // 0 selects sqrt(p) for classification and max(1, p/3) for regression.
  int features_per_split = 0;
  std::uint64_t seed = 0;
};

// Bagged CART ensemble (Gini for classification, variance for regression)
// that accumulates the weighted impurity decrease of every split.
class RandomForest {
 public:
  RandomForest(ImportanceTask task, ForestOptions options);

  // rows: n samples of p features; targets: class ids or real values.
  void fit(const std::vector<std::vector<double>>& rows, const std::vector<double>& targets);

  double predict(const std::vector<double>& row) const;
  // Mean decrease in impurity per feature, normalized to sum to 1.
  const std::vector<double>& importances() const { return importances_; }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double prediction = 0.0;
  };
  using Tree = std::vector<Node>;

  int grow(Tree& tree, std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, int depth, Rng& rng,
           std::vector<double>& gains);
  double impurity(const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) const;
  double leaf_value(const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) const;

  ImportanceTask task_;
  ForestOptions options_;
  int class_count_ = 0;
  std::vector<std::vector<double>> rows_;
  std::vector<double> targets_;
  std::vector<Tree> trees_;
  std::vector<double> importances_;
};

// Impurity-based ranking over a dataset with absent entries imputed by
// column mode/mean. Ties in score break toward the lower column index.
ImportanceRanking rank_importance(const std::vector<TabularSample>& dataset, const std::vector<double>& labels,
                                  ImportanceTask task, const ForestOptions& options = {});

ImportanceRanking ranking_from_scores(std::vector<double> scores);

}  // namespace rovtl::tabular
