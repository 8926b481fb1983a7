#include "rovtl/importance.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>

using namespace rovtl;
using namespace rovtl::tabular;

namespace {

struct Table {
  SchemaPtr schema;
  std::vector<TabularSample> rows;
  std::vector<double> labels;
};

// Continuous columns; `make_row` fills one row of values from the label and an rng.
Table make_table(int columns, int n, std::uint64_t seed,
                 const std::function<std::vector<double>(int label, Rng&)>& make_row) {
  std::vector<Column> cols;
  for (int c = 0; c < columns; ++c) cols.push_back({"f" + std::to_string(c), ColumnKind::continuous, {}});
  Table t;
  t.schema = std::make_shared<const AttributeSchema>(std::move(cols));
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    const auto values = make_row(label, rng);
    std::vector<Entry> entries;
    for (int c = 0; c < columns; ++c) entries.push_back({c, values[c]});
    t.rows.emplace_back(t.schema, std::move(entries));
    t.labels.push_back(label);
  }
  return t;
}

// Oracle: best accuracy of a single threshold on one column.
double single_feature_accuracy(const Table& t, int column) {
  std::vector<std::pair<double, double>> v;
  for (std::size_t i = 0; i < t.rows.size(); ++i) v.emplace_back(*t.rows[i].value(column), t.labels[i]);
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double positives_total = 0;
  for (const auto& p : v) positives_total += p.second;
  double best = std::max(positives_total, n - positives_total) / n;
  double pos_left = 0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    pos_left += v[i].second;
    const double left = static_cast<double>(i + 1);
    // left predicted 0, right predicted 1, or the reverse
    const double a = (left - pos_left) + (positives_total - pos_left);
    best = std::max({best, a / n, (n - a) / n});
  }
  return best;
}

std::vector<double> noise_row(int columns, Rng& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> v(columns);
  for (auto& x : v) x = normal(rng);
  return v;
}

}  // namespace

TEST_CASE("a column equal to the label is ranked first") {
  const Table t = make_table(6, 300, 1, [](int label, Rng& rng) {
    auto v = noise_row(6, rng);
    v[0] = label;
    return v;
  });
  int oracle_best = 0;
  for (int c = 1; c < 6; ++c) {
    if (single_feature_accuracy(t, c) > single_feature_accuracy(t, oracle_best)) oracle_best = c;
  }
  REQUIRE(oracle_best == 0);
  ForestOptions o;
  o.trees = 50;
  const ImportanceRanking r = rank_importance(t.rows, t.labels, ImportanceTask::classification, o);
  r.validate(6);
  CHECK(r.order[0] == oracle_best);
}

TEST_CASE("duplicate informative columns both outrank all noise columns") {
  const Table t = make_table(6, 400, 2, [](int label, Rng& rng) {
    auto v = noise_row(6, rng);
    std::normal_distribution<double> jitter(0.0, 0.5);
    v[2] = label + jitter(rng);
    v[4] = v[2];
    return v;
  });
  for (int c : {0, 1, 3, 5}) {
    CHECK(single_feature_accuracy(t, 2) > single_feature_accuracy(t, c));
  }
  ForestOptions o;
  o.trees = 60;
  const ImportanceRanking r = rank_importance(t.rows, t.labels, ImportanceTask::classification, o);
  const std::vector<int> top{r.order[0], r.order[1]};
  CHECK(std::count(top.begin(), top.end(), 2) == 1);
  CHECK(std::count(top.begin(), top.end(), 4) == 1);
}

TEST_CASE("all-noise ranking is deterministic for a fixed seed") {
  const Table t = make_table(5, 200, 3, [](int, Rng& rng) { return noise_row(5, rng); });
  ForestOptions o;
  o.trees = 30;
  o.seed = 42;
  const ImportanceRanking a = rank_importance(t.rows, t.labels, ImportanceTask::classification, o);
  const ImportanceRanking b = rank_importance(t.rows, t.labels, ImportanceTask::classification, o);
  CHECK(a.order == b.order);
  CHECK(a.scores == b.scores);
}

TEST_CASE("regression forest importance and predictions") {
  const Table t = make_table(4, 400, 4, [](int, Rng& rng) {
    auto v = noise_row(4, rng);
    v[3] = 0.0;
    return v;
  });
  std::vector<double> y;
  std::vector<std::vector<double>> x;
  for (const auto& row : t.rows) {
    y.push_back(3.0 * *row.value(1));
    x.push_back({*row.value(0), *row.value(1), *row.value(2), *row.value(3)});
  }
  ForestOptions o;
  o.trees = 40;
  RandomForest forest(ImportanceTask::regression, o);
  forest.fit(x, y);
  double total = 0.0;
  for (double s : forest.importances()) total += s;
  CHECK(total == doctest::Approx(1.0));
  CHECK(forest.importances()[1] > 0.5);
  CHECK(forest.importances()[3] == 0.0);
  CHECK(forest.predict({0.0, 1.0, 0.0, 0.0}) == doctest::Approx(3.0).epsilon(0.15));

  const ImportanceRanking r = rank_importance(t.rows, y, ImportanceTask::regression, o);
  CHECK(r.order[0] == 1);
  CHECK(r.order[3] == 3);
}

TEST_CASE("absent entries are imputed before fitting") {
  Table t = make_table(3, 200, 5, [](int label, Rng& rng) {
    auto v = noise_row(3, rng);
    v[1] = label;
    return v;
  });
  for (std::size_t i = 0; i < t.rows.size(); i += 3) t.rows[i] = t.rows[i].restricted_to({1});
  ForestOptions o;
  o.trees = 30;
  CHECK(rank_importance(t.rows, t.labels, ImportanceTask::classification, o).order[0] == 1);
}
