#include "rovtl/evaluation.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <filesystem>

using namespace rovtl;
using namespace rovtl::eval;
using finetune::TaskSpec;

namespace {

// Fraction of (positive, negative) pairs ranked correctly, ties count half.
double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double good = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1;
      good += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return good / pairs;
}

Matrix column(const std::vector<double>& v) {
  Matrix m(static_cast<ag::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<ag::Index>(i), 0) = v[i];
  return m;
}

struct Fixture {
  synth::SynthDataset data = synth::generate(rovtl::testing::tiny_synth(24, 3));
  finetune::RovtlModel model = finetune::RovtlModel::create(rovtl::testing::tiny_model(8), *data.data.schema, 2);
};

}  // namespace

TEST_CASE("AUC against pair counting") {
  CHECK(binary_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == doctest::Approx(0.75));
  CHECK(binary_auc({0.1, 0.2, 0.3, 0.4}, {0, 0, 1, 1}) == 1.0);
  CHECK(binary_auc({0.4, 0.3, 0.2, 0.1}, {0, 0, 1, 1}) == 0.0);
  CHECK_THROWS(binary_auc({0.1, 0.2}, {1, 1}));

  Rng rng(1);
  std::uniform_int_distribution<int> coarse(0, 5);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
      s.push_back(coarse(rng) / 5.0);  // plenty of ties
      y.push_back(coin(rng));
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(binary_auc(s, y) == doctest::Approx(pair_count_auc(s, y)).epsilon(1e-12));
  }
}

TEST_CASE("metric by task") {
  const TaskSpec two = TaskSpec::classification(2);
  Matrix scores(4, 2);
  scores << 0.9, 0.1, 0.6, 0.4, 0.65, 0.35, 0.2, 0.8;
  const Matrix targets = column({0, 0, 1, 1});
  CHECK(metric(scores, targets, MetricKind::accuracy, two) == doctest::Approx(0.75));
  CHECK(metric(scores, targets, MetricKind::auc, two) == doctest::Approx(0.75));

  const TaskSpec reg = TaskSpec::regression();
  CHECK(metric(column({1, 2, 3}), column({1, 2, 3}), MetricKind::mae, reg) == 0.0);
  CHECK(metric(column({1, 2, 3}), column({2, 2, 1}), MetricKind::mae, reg) == doctest::Approx(1.0));
  CHECK_THROWS(metric(column({1}), column({1}), MetricKind::auc, reg));

  const TaskSpec ml = TaskSpec::multilabel(2);
  Matrix ms(4, 2), mt(4, 2);
  ms << 0.1, 0.9, 0.4, 0.8, 0.35, 0.2, 0.8, 0.1;
  mt << 0, 1, 0, 1, 1, 0, 1, 0;
  // Column 0 gives 0.75, column 1 is perfectly ranked.
  CHECK(metric(ms, mt, MetricKind::auc, ml) == doctest::Approx((0.75 + 1.0) / 2));
  CHECK(higher_is_better(MetricKind::auc));
  CHECK_FALSE(higher_is_better(MetricKind::mae));
  CHECK(parse_metric_kind("accuracy") == MetricKind::accuracy);
  CHECK_THROWS(parse_metric_kind("f1"));
}

TEST_CASE("sweep endpoints and summary") {
  Fixture fx;
  const Dataset& test = fx.data.data;
  CHECK(default_fractions().size() == 11);
  CHECK(mean_over_sweep({0.5, 0.7, 0.9}) == doctest::Approx(0.7));
  CHECK_THROWS(mean_over_sweep({}));

  std::vector<SweepResult> results;
  for (auto kind : {tabular::MissingnessKind::random, tabular::MissingnessKind::least_important,
                    tabular::MissingnessKind::most_important}) {
    SweepOptions opt;
    opt.protocol = kind;
    opt.metric = MetricKind::auc;
    opt.seed = 4;
    if (kind != tabular::MissingnessKind::random) opt.ranking = fx.data.truth;
    const SweepResult r = sweep(fx.model, test, opt);
    CHECK(r.values.size() == 11);
    CHECK(r.mean == doctest::Approx(mean_over_sweep(r.values)).epsilon(1e-15));
    CHECK(r.value_at(1.0) == doctest::Approx(evaluate_full(fx.model, test, MetricKind::auc)).epsilon(1e-12));
    CHECK_THROWS(r.value_at(0.55));
    results.push_back(r);
    CHECK(sweep(fx.model, test, opt).values == r.values);
  }
  // Nothing is left at zero availability, whatever the protocol.
  CHECK(results[0].value_at(0.0) == results[1].value_at(0.0));
  CHECK(results[1].value_at(0.0) == results[2].value_at(0.0));

  SweepOptions unranked;
  unranked.protocol = tabular::MissingnessKind::most_important;
  CHECK_THROWS(sweep(fx.model, test, unranked));

  const auto path = std::filesystem::temp_directory_path() / "rovtl_test_sweep.csv";
  write_sweep_csv(results, path);
  const auto back = read_sweep_csv(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].protocol == results[i].protocol);
    CHECK(back[i].fractions == results[i].fractions);
    CHECK(back[i].values == results[i].values);
  }
  std::filesystem::remove(path);

  SweepResult bad = results[0];
  bad.mean += 0.1;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("random sweep masks depend only on the seed") {
  Fixture fx;
  tabular::MissingnessProtocol p;
  p.availability = 0.5;
  p.seed = 11;
  CHECK(scores_at(fx.model, fx.data.data, p) == scores_at(fx.model, fx.data.data, p));
}

TEST_CASE("interpretability report") {
  Fixture fx;
  Dataset test = fx.data.data;
  test.samples[0] = tabular::TabularSample(test.schema, {});
  const InterpretabilityReport report = interpretability_report(fx.model, test);
  CHECK(report.attributes.size() == test.schema->size());
  CHECK(report.per_sample.rows() == static_cast<ag::Index>(test.size()) - 1);
  for (ag::Index r = 0; r < report.per_sample.rows(); ++r) CHECK(report.per_sample.row(r).sum() == doctest::Approx(1.0));
  REQUIRE(report.scores.rows() == static_cast<ag::Index>(report.groups.size()));
  for (ag::Index g = 0; g < report.scores.rows(); ++g) CHECK(report.scores.row(g).sum() == doctest::Approx(1.0));
  const auto ranking = report.overall_ranking();
  CHECK(ranking.size() == report.attributes.size());
  const auto rows = report.sorted_rows();
  CHECK(rows.size() == report.groups.size() * report.attributes.size());
  for (std::size_t i = 1; i < report.attributes.size(); ++i) {
    if (rows[i].group == rows[i - 1].group) CHECK(rows[i].score <= rows[i - 1].score);
  }

  finetune::ModelConfig concat = rovtl::testing::tiny_model(8);
  concat.fusion.kind = fusion::FusionKind::concat;
  const auto plain = finetune::RovtlModel::create(concat, *test.schema, 1);
  CHECK_THROWS(interpretability_report(plain, test));
}
