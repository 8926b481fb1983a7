#include "rovtl/importance.hpp"
#include "rovtl/tabular.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <bit>
#include <filesystem>
#include <map>
#include <set>

using namespace rovtl;
using namespace rovtl::tabular;
using rovtl::testing::full_sample;
using rovtl::testing::letter_schema;

using rovtl::testing::mask_of;
using rovtl::testing::nested_pair_law;
using rovtl::testing::two_stage_law;

TEST_CASE("schema invariants are enforced") {
  CHECK_THROWS(AttributeSchema({{"a", ColumnKind::continuous, {}}, {"a", ColumnKind::continuous, {}}}));
  CHECK_THROWS(AttributeSchema({{"c", ColumnKind::categorical, {}}}));
  const auto schema = letter_schema(3);
  CHECK(schema->index_of("b") == 1);
  CHECK_FALSE(schema->index_of("zz").has_value());
  CHECK(schema->level_of(1, "y") == 1);
  CHECK(parse_schema(format_schema(*schema)) == *schema);
  CHECK(parse_schema(format_schema(*schema)).fingerprint() == schema->fingerprint());
  CHECK(letter_schema(4)->fingerprint() != schema->fingerprint());
}

TEST_CASE("samples reject values outside the schema") {
  const auto schema = letter_schema(3);
  CHECK_THROWS(TabularSample(schema, {{5, 1.0}}));
  CHECK_THROWS(TabularSample(schema, {{1, 3.0}}));
  CHECK_THROWS(TabularSample(schema, {{0, std::nan("")}}));
  CHECK_THROWS(TabularSample(schema, {{0, 1.0}, {0, 2.0}}));
  const TabularSample s(schema, {{2, 1.0}, {0, 4.0}});
  CHECK(s.present() == std::vector<int>{0, 2});
  CHECK(s.value(2) == 1.0);
  CHECK_FALSE(s.value(1).has_value());
  CHECK(TabularSample(schema, {}).empty());
}

TEST_CASE("sample_subset: forced and constrained cases") {
  Rng rng(1);
  const auto one = letter_schema(1);
  const TabularSample a = full_sample(one);
  CHECK(sample_subset(a, rng) == a);
  CHECK_THROWS(sample_subset(TabularSample(one, {}), rng));

  const TabularSample abc = full_sample(letter_schema(3));
  for (int i = 0; i < 200; ++i) {
    const TabularSample s = sample_subset(abc, rng);
    CHECK(s.size() >= 1);
    CHECK(s.size() <= 3);
    for (const auto& e : s.entries()) CHECK(abc.value(e.column) == e.value);
  }
}

TEST_CASE("sample_subset frequencies match exact enumeration of the two-stage law") {
  const TabularSample abc = full_sample(letter_schema(3));
  const auto law = two_stage_law(0b111, 1, 3);
  double size_oracle[4] = {};
  double member_oracle[3] = {};
  for (const auto& [mask, p] : law) {
    size_oracle[std::popcount(mask)] += p;
    for (int c = 0; c < 3; ++c) {
      if (mask & (1u << c)) member_oracle[c] += p;
    }
  }
  Rng rng(2);
  const int draws = 30000;
  double sizes[4] = {};
  double members[3] = {};
  std::map<unsigned, double> seen;
  for (int i = 0; i < draws; ++i) {
    const TabularSample s = sample_subset(abc, rng);
    sizes[s.size()] += 1.0 / draws;
    for (int c : s.present()) members[c] += 1.0 / draws;
    seen[mask_of(s)] += 1.0 / draws;
  }
  for (int k = 1; k <= 3; ++k) CHECK(std::abs(sizes[k] - size_oracle[k]) < 0.02);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(members[c] - member_oracle[c]) < 0.02);
  for (const auto& [mask, p] : law) CHECK(std::abs(seen[mask] - p) < 0.02);
  CHECK(member_oracle[0] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("sample_nested_pair: forced and constrained cases") {
  Rng rng(3);
  const TabularSample a = full_sample(letter_schema(1));
  const NestedPair p = sample_nested_pair(a, rng);
  CHECK(p.plus == a);
  CHECK(p.minus.empty());

  const TabularSample abc = full_sample(letter_schema(3));
  for (int i = 0; i < 500; ++i) {
    const NestedPair q = sample_nested_pair(abc, rng);
    const unsigned plus = mask_of(q.plus);
    const unsigned minus = mask_of(q.minus);
    CHECK((minus & ~plus) == 0u);
    CHECK(minus != plus);
    CHECK(q.minus.size() < q.plus.size());
    CHECK(q.plus.size() >= 1);
  }
}

TEST_CASE("sample_nested_pair frequencies match exact enumeration") {
  // plus ~ two-stage law on [1, N]; minus ~ two-stage law on [0, |plus| - 1] within plus.
  const TabularSample ab = full_sample(letter_schema(2));
  std::map<unsigned, double> plus_oracle = two_stage_law(0b11, 1, 2);
  CHECK(plus_oracle[0b11] == doctest::Approx(0.5));

  Rng rng(4);
  const int draws = 30000;
  std::map<unsigned, double> plus_seen;
  for (int i = 0; i < draws; ++i) plus_seen[mask_of(sample_nested_pair(ab, rng).plus)] += 1.0 / draws;
  for (const auto& [mask, p] : plus_oracle) CHECK(std::abs(plus_seen[mask] - p) < 0.02);

  const TabularSample abc = full_sample(letter_schema(3));
  const auto joint_oracle = nested_pair_law(0b111);
  std::map<std::pair<unsigned, unsigned>, double> joint_seen;
  for (int i = 0; i < draws; ++i) {
    const NestedPair q = sample_nested_pair(abc, rng);
    joint_seen[{mask_of(q.plus), mask_of(q.minus)}] += 1.0 / draws;
  }
  for (const auto& [key, p] : joint_oracle) CHECK(std::abs(joint_seen[key] - p) < 0.02);
  CHECK(joint_seen.size() == joint_oracle.size());
}

TEST_CASE("kept_count rounds half up") {
  CHECK(kept_count(0.5, 10) == 5);
  CHECK(kept_count(0.25, 10) == 3);
  CHECK(kept_count(0.24, 10) == 2);
  CHECK(kept_count(0.0, 7) == 0);
  CHECK(kept_count(1.0, 7) == 7);
  CHECK(kept_count(0.1, 5) == 1);
}

TEST_CASE("missingness protocols") {
  const auto schema = letter_schema(10);
  const TabularSample s = full_sample(schema);
  MissingnessProtocol p;
  p.availability = 1.0;
  CHECK(apply_missingness(s, p) == s);
  p.availability = 0.0;
  CHECK(apply_missingness(s, p).empty());

  ImportanceRanking identity;
  for (int i = 0; i < 10; ++i) {
    identity.order.push_back(i);
    identity.scores.push_back(10.0 - i);
  }
  p.kind = MissingnessKind::most_important;
  p.availability = 0.5;
  CHECK_THROWS(apply_missingness(s, p));
  p.ranking = identity;
  CHECK(apply_missingness(s, p).present() == std::vector<int>{0, 1, 2, 3, 4});
  p.kind = MissingnessKind::least_important;
  CHECK(apply_missingness(s, p).present() == std::vector<int>{5, 6, 7, 8, 9});

  // The ranked kinds only drop among the attributes that are present.
  const TabularSample partial = s.restricted_to({1, 3, 8, 9});
  p.kind = MissingnessKind::most_important;
  CHECK(apply_missingness(partial, p).present() == std::vector<int>{1, 3});

  p.kind = MissingnessKind::random;
  p.seed = 7;
  const TabularSample r = apply_missingness(s, p);
  CHECK(r.size() == 5);
  CHECK(apply_missingness(s, p) == r);

  p.availability = 1.5;
  CHECK_THROWS(apply_missingness(s, p));
}

TEST_CASE("random missingness keeps each attribute with the availability fraction") {
  const TabularSample s = full_sample(letter_schema(10));
  MissingnessProtocol p;
  p.availability = 0.3;
  std::vector<double> kept(10, 0.0);
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    p.seed = derive_seed(5, streams::kSweep, i);
    for (int c : apply_missingness(s, p).present()) kept[c] += 1.0 / trials;
  }
  for (double k : kept) CHECK(std::abs(k - 0.3) < 0.02);
}

TEST_CASE("importance ranking invariants") {
  const ImportanceRanking r = ranking_from_scores({0.1, 0.5, 0.1, 0.3});
  CHECK(r.order == std::vector<int>{1, 3, 0, 2});
  CHECK(r.positions() == std::vector<int>{2, 0, 3, 1});
  r.validate(4);
  CHECK_THROWS(r.validate(5));
  ImportanceRanking bad = r;
  bad.order = {3, 1, 0, 2};
  CHECK_THROWS(bad.validate(4));
}

TEST_CASE("marginal corruption") {
  const auto schema = letter_schema(4);
  Rng rng(6);
  std::vector<TabularSample> train;
  for (int i = 0; i < 20; ++i) train.push_back(full_sample(schema, i));
  const MarginalPools pools = build_marginals(train, schema->size());
  const TabularSample s = full_sample(schema, 100.0);
  CHECK(marginal_corrupt(s, pools, 0.0, rng) == s);

  MarginalPools single;
  single.values = {{7.0}, {2.0}, {-1.0}, {0.0}};
  const TabularSample all = marginal_corrupt(s, single, 1.0, rng);
  CHECK(all.present() == s.present());
  for (const auto& e : all.entries()) CHECK(e.value == single.values[e.column][0]);

  // The presence pattern never changes; replacements are binomial(n, rate).
  int replaced = 0;
  int total = 0;
  while (total < 10000) {
    const TabularSample c = marginal_corrupt(s, pools, 0.3, rng);
    CHECK(c.present() == s.present());
    for (const auto& e : c.entries()) {
      replaced += e.value != *s.value(e.column);
      ++total;
    }
  }
  // Categorical pools can redraw the same level; use continuous columns only.
  int cont_replaced = 0;
  int cont_total = 0;
  Rng rng2(7);
  while (cont_total < 10000) {
    const TabularSample c = marginal_corrupt(s, pools, 0.3, rng2);
    for (int col : {0, 2}) {
      cont_replaced += *c.value(col) != *s.value(col);
      ++cont_total;
    }
  }
  CHECK(std::abs(static_cast<double>(cont_replaced) / cont_total - 0.3) < 0.01);
  CHECK(replaced <= total);
}

TEST_CASE("schema and CSV files round-trip, empty cells are missing") {
  const auto dir = std::filesystem::temp_directory_path() / "rovtl_test_tabular";
  std::filesystem::create_directories(dir);
  const auto schema = letter_schema(4);
  write_schema(*schema, dir / "schema.csv");
  const auto loaded = std::make_shared<const AttributeSchema>(read_schema(dir / "schema.csv"));
  CHECK(*loaded == *schema);

  std::vector<TabularSample> rows{full_sample(schema, 0.125), full_sample(schema).restricted_to({1, 2}),
                                  TabularSample(schema, {})};
  write_csv(rows, *schema, dir / "t.csv");
  const auto back = read_csv(dir / "t.csv", loaded);
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(back[i].entries() == rows[i].entries());
  std::filesystem::remove_all(dir);
}

TEST_CASE("dense imputation fills mean and mode") {
  const auto schema = letter_schema(2);
  std::vector<TabularSample> rows{TabularSample(schema, {{0, 1.0}, {1, 2.0}}), TabularSample(schema, {{0, 3.0}, {1, 2.0}}),
                                  TabularSample(schema, {{1, 0.0}}), TabularSample(schema, {})};
  const auto dense = impute_dense(rows, *schema);
  CHECK(dense[2][0] == 2.0);
  CHECK(dense[3][1] == 2.0);
  CHECK(dense[0][0] == 1.0);
}
