#include "rovtl/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rovtl::tabular {

RandomForest::RandomForest(ImportanceTask task, ForestOptions options) : task_(task), options_(options) {
  if (options_.trees <= 0) throw std::invalid_argument("forest: tree count must be positive");
  if (options_.min_samples_leaf <= 0) throw std::invalid_argument("forest: min_samples_leaf must be positive");
}

double RandomForest::impurity(const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) const {
  const double n = static_cast<double>(end - begin);
  if (task_ == ImportanceTask::classification) {
    std::vector<double> counts(class_count_, 0.0);
    for (std::size_t i = begin; i < end; ++i) counts[static_cast<std::size_t>(targets_[idx[i]])] += 1.0;
    double sq = 0.0;
    for (double c : counts) sq += (c / n) * (c / n);
    return 1.0 - sq;
  }
  double mean = 0.0;
  for (std::size_t i = begin; i < end; ++i) mean += targets_[idx[i]];
  mean /= n;
  double var = 0.0;
  for (std::size_t i = begin; i < end; ++i) var += (targets_[idx[i]] - mean) * (targets_[idx[i]] - mean);
  return var / n;
}

double RandomForest::leaf_value(const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) const {
  if (task_ == ImportanceTask::classification) {
    std::vector<int> counts(class_count_, 0);
    for (std::size_t i = begin; i < end; ++i) ++counts[static_cast<std::size_t>(targets_[idx[i]])];
    return static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
  double mean = 0.0;
  for (std::size_t i = begin; i < end; ++i) mean += targets_[idx[i]];
  return mean / static_cast<double>(end - begin);
}

int RandomForest::grow(Tree& tree, std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, int depth,
                       Rng& rng, std::vector<double>& gains) {
  const int id = static_cast<int>(tree.size());
  tree.push_back({});
  tree[id].prediction = leaf_value(idx, begin, end);

  const std::size_t n = end - begin;
  const auto min_leaf = static_cast<std::size_t>(options_.min_samples_leaf);
  const double node_impurity = impurity(idx, begin, end);
  if (depth >= options_.max_depth || n < 2 * min_leaf || node_impurity <= 1e-12) return id;

  const std::size_t p = rows_.front().size();
  std::size_t mtry = static_cast<std::size_t>(options_.features_per_split);
  if (mtry == 0) {
    mtry = task_ == ImportanceTask::classification
               ? static_cast<std::size_t>(std::max(1.0, std::floor(std::sqrt(static_cast<double>(p)))))
               : std::max<std::size_t>(1, p / 3);
  }
  mtry = std::min(mtry, p);

  std::vector<std::size_t> features(p);
  std::iota(features.begin(), features.end(), 0);
  std::shuffle(features.begin(), features.end(), rng);

  double best_gain = 0.0;
  int best_feature = -1;
  double best_threshold = 0.0;
  std::vector<std::size_t> sorted(idx.begin() + begin, idx.begin() + end);
  std::size_t visited = 0;
  for (std::size_t f : features) {
    if (visited >= mtry) break;
    std::sort(sorted.begin(), sorted.end(),
              [&](std::size_t a, std::size_t b) { return rows_[a][f] < rows_[b][f]; });
    if (rows_[sorted.front()][f] == rows_[sorted.back()][f]) continue;  // constant here, does not count
    ++visited;

    // Prefix statistics for a left-to-right scan of split points.
    std::vector<double> left_counts(class_count_, 0.0);
    std::vector<double> total_counts(class_count_, 0.0);
    double left_sum = 0.0, left_sq = 0.0, total_sum = 0.0, total_sq = 0.0;
    for (std::size_t s : sorted) {
      const double y = targets_[s];
      if (task_ == ImportanceTask::classification) {
        total_counts[static_cast<std::size_t>(y)] += 1.0;
      } else {
        total_sum += y;
        total_sq += y * y;
      }
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double y = targets_[sorted[i]];
      if (task_ == ImportanceTask::classification) {
        left_counts[static_cast<std::size_t>(y)] += 1.0;
      } else {
        left_sum += y;
        left_sq += y * y;
      }
      const double a = rows_[sorted[i]][f];
      const double b = rows_[sorted[i + 1]][f];
      const std::size_t nl = i + 1;
      const std::size_t nr = n - nl;
      if (a == b || nl < min_leaf || nr < min_leaf) continue;
      const double dl = static_cast<double>(nl);
      const double dr = static_cast<double>(nr);
      double left_imp = 0.0, right_imp = 0.0;
      if (task_ == ImportanceTask::classification) {
        double sl = 0.0, sr = 0.0;
        for (int c = 0; c < class_count_; ++c) {
          const double l = left_counts[c];
          const double r = total_counts[c] - l;
          sl += (l / dl) * (l / dl);
          sr += (r / dr) * (r / dr);
        }
        left_imp = 1.0 - sl;
        right_imp = 1.0 - sr;
      } else {
        const double lm = left_sum / dl;
        const double rm = (total_sum - left_sum) / dr;
        left_imp = std::max(0.0, left_sq / dl - lm * lm);
        right_imp = std::max(0.0, (total_sq - left_sq) / dr - rm * rm);
      }
      const double gain = static_cast<double>(n) * node_impurity - dl * left_imp - dr * right_imp;
      if (gain > best_gain + 1e-12) {
        best_gain = gain;
        best_feature = static_cast<int>(f);
        best_threshold = 0.5 * (a + b);
      }
    }
  }
  if (best_feature < 0) return id;

  gains[best_feature] += best_gain;
  auto mid = std::partition(idx.begin() + begin, idx.begin() + end,
                            [&](std::size_t s) { return rows_[s][best_feature] <= best_threshold; });
  const auto split = static_cast<std::size_t>(mid - idx.begin());
  const int left = grow(tree, idx, begin, split, depth + 1, rng, gains);
  const int right = grow(tree, idx, split, end, depth + 1, rng, gains);
  tree[id].feature = best_feature;
  tree[id].threshold = best_threshold;
  tree[id].left = left;
  tree[id].right = right;
  return id;
}

void RandomForest::fit(const std::vector<std::vector<double>>& rows, const std::vector<double>& targets) {
  if (rows.size() < 2) throw std::invalid_argument("forest: need at least two samples");
  if (rows.size() != targets.size()) throw std::invalid_argument("forest: labels not aligned with rows");
  const std::size_t p = rows.front().size();
  if (p == 0) throw std::invalid_argument("forest: no features");
  for (const auto& r : rows) {
    if (r.size() != p) throw std::invalid_argument("forest: ragged feature rows");
  }
  const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
  if (*lo == *hi) throw std::invalid_argument("forest: labels are constant, importance is undefined");
  if (task_ == ImportanceTask::classification) {
    for (double y : targets) {
      if (y < 0 || y != std::floor(y)) throw std::invalid_argument("forest: class labels must be non-negative integers");
    }
    class_count_ = static_cast<int>(*hi) + 1;
  }
  rows_ = rows;
  targets_ = targets;
  trees_.clear();

  Rng rng = make_rng(options_.seed, streams::kForest);
  std::vector<double> gains(p, 0.0);
  const std::size_t n = rows.size();
  std::uniform_int_distribution<std::size_t> draw(0, n - 1);
  for (int t = 0; t < options_.trees; ++t) {
    std::vector<std::size_t> bag(n);
    for (auto& b : bag) b = draw(rng);
    Tree tree;
    grow(tree, bag, 0, n, 0, rng, gains);
    trees_.push_back(std::move(tree));
  }
  const double total = std::accumulate(gains.begin(), gains.end(), 0.0);
  importances_.assign(p, 0.0);
  if (total > 0.0) {
    for (std::size_t f = 0; f < p; ++f) importances_[f] = gains[f] / total;
  }
}

double RandomForest::predict(const std::vector<double>& row) const {
  if (trees_.empty()) throw std::logic_error("forest: predict before fit");
  std::vector<int> votes(static_cast<std::size_t>(std::max(class_count_, 1)), 0);
  double sum = 0.0;
  for (const auto& tree : trees_) {
    int node = 0;
    while (tree[node].feature >= 0) {
      node = row.at(tree[node].feature) <= tree[node].threshold ? tree[node].left : tree[node].right;
    }
    if (task_ == ImportanceTask::classification) {
      ++votes[static_cast<std::size_t>(tree[node].prediction)];
    } else {
      sum += tree[node].prediction;
    }
  }
  if (task_ == ImportanceTask::classification) {
    return static_cast<double>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return sum / static_cast<double>(trees_.size());
}

ImportanceRanking ranking_from_scores(std::vector<double> scores) {
  ImportanceRanking ranking;
  ranking.order.resize(scores.size());
  std::iota(ranking.order.begin(), ranking.order.end(), 0);
  std::stable_sort(ranking.order.begin(), ranking.order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  ranking.scores = std::move(scores);
  return ranking;
}

ImportanceRanking rank_importance(const std::vector<TabularSample>& dataset, const std::vector<double>& labels,
                                  ImportanceTask task, const ForestOptions& options) {
  if (dataset.size() < 2) throw std::invalid_argument("rank_importance: need at least two samples");
  if (dataset.size() != labels.size()) throw std::invalid_argument("rank_importance: labels not aligned");
  const auto& schema = dataset.front().schema();
  RandomForest forest(task, options);
  forest.fit(impute_dense(dataset, *schema), labels);
  return ranking_from_scores(forest.importances());
}

}  // namespace rovtl::tabular
