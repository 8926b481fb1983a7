#include "rovtl/encoders.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace rovtl;
using namespace rovtl::encoders;
using rovtl::testing::full_sample;
using rovtl::testing::letter_schema;
using rovtl::testing::random_matrix;
using rovtl::testing::tiny_encoders;

namespace {

double max_abs_diff(const ag::Matrix& a, const ag::Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

vision::Image noise_image(Rng& rng, int size) {
  vision::Image im(1, size, size);
  std::normal_distribution<double> n;
  for (auto& p : im.pixels) p = n(rng);
  return im;
}

}  // namespace

TEST_CASE("image encoder: shapes, finiteness, determinism") {
  const EncoderConfig cfg = tiny_encoders(8);
  Rng rng(1);
  const ImageEncoder enc(cfg.image, rng);
  CHECK(cfg.image.token_count() == 4);

  const FeatureBundle zero = enc.encode(vision::Image(1, 8, 8));
  CHECK(zero.tokens.value().allFinite());
  CHECK(zero.pooled.value().allFinite());
  CHECK(zero.length() == 4);
  CHECK(zero.width() == 8);
  CHECK(zero.modality == Modality::image);
  CHECK(max_abs_diff(zero.pooled.value(), zero.tokens.value().colwise().mean()) < 1e-12);

  std::vector<vision::Image> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(noise_image(rng, 8));
  batch.push_back(batch[2]);
  ag::NoGradGuard guard;
  const auto bundles = enc.encode_batch(batch);
  REQUIRE(bundles.size() == 6);
  for (const auto& b : bundles) CHECK(b.length() == cfg.image.token_count());
  CHECK(bundles[2].tokens.value() == bundles[5].tokens.value());
  CHECK_THROWS(enc.encode(vision::Image(1, 6, 6)));
}

TEST_CASE("attribute tokens") {
  const auto schema = letter_schema(4);
  Rng rng(2);
  TabularEncoder enc(tiny_encoders().tabular, *schema, rng);
  std::vector<tabular::TabularSample> train{full_sample(schema, 0.0), full_sample(schema, 2.0)};
  enc.fit_standardization(train);
  const ColumnStats st = enc.standardization().at("a");
  CHECK(st.mean == doctest::Approx(1.5));

  CHECK(enc.continuous_token("a", 0.7).value() == enc.continuous_token("a", 0.7).value());
  CHECK(enc.categorical_token("b", "y").value() == enc.categorical_token("b", "y").value());

  const ag::Matrix at_mean = enc.continuous_token("a", st.mean).value();
  const ag::Matrix expected =
      enc.name_table().value().row(name_bucket("a", enc.config().name_buckets)) + enc.continuous_bias().value();
  CHECK(max_abs_diff(at_mean, expected) < 1e-12);

  // Distinct names in distinct buckets give distinct tokens for the same value.
  REQUIRE(name_bucket("a", 64) != name_bucket("c", 64));
  CHECK(max_abs_diff(enc.continuous_token("a", 1.0).value(), enc.continuous_token("c", 1.0).value()) > 1e-6);
  // An unseen level maps to the shared unknown row rather than failing.
  const ag::Matrix unknown_b =
      enc.categorical_token("b", "never").value() - enc.name_table().value().row(name_bucket("b", 64));
  const ag::Matrix unknown_d =
      enc.categorical_token("d", "never").value() - enc.name_table().value().row(name_bucket("d", 64));
  CHECK(max_abs_diff(unknown_b, unknown_d) < 1e-12);
}

TEST_CASE("tabular encoder accepts every present-set size") {
  const auto schema = letter_schema(50);
  Rng rng(3);
  const TabularEncoder enc(tiny_encoders().tabular, *schema, rng);
  const tabular::TabularSample full = full_sample(schema);
  ag::NoGradGuard guard;
  for (int k = 0; k <= 50; ++k) {
    std::vector<int> cols(k);
    for (int i = 0; i < k; ++i) cols[i] = (i * 7) % 50;
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    const FeatureBundle b = enc.encode(full.restricted_to(cols));
    CHECK(b.length() == static_cast<int>(cols.size()) + 1);
    CHECK(b.tokens.value().allFinite());
  }
}

TEST_CASE("empty sample gives a [CLS]-only bundle") {
  const auto schema = letter_schema(3);
  Rng rng(4);
  const TabularEncoder enc(tiny_encoders().tabular, *schema, rng);
  const FeatureBundle b = enc.encode(tabular::TabularSample(schema, {}));
  CHECK(b.length() == 1);
  CHECK(b.modality == Modality::tabular);
  CHECK(b.pooled.value() == b.tokens.value());
}

TEST_CASE("[CLS] does not depend on attribute order") {
  // Same named attributes under two schemas with different column orders.
  const auto forward = letter_schema(3);
  std::vector<tabular::Column> reversed(forward->columns().rbegin(), forward->columns().rend());
  const auto backward = std::make_shared<const tabular::AttributeSchema>(reversed);
  Rng rng(5);
  const TabularEncoder enc(tiny_encoders().tabular, *forward, rng);
  const tabular::TabularSample s1(forward, {{0, 0.3}, {1, 2.0}, {2, -1.2}});
  const tabular::TabularSample s2(backward, {{2, 0.3}, {1, 2.0}, {0, -1.2}});
  ag::NoGradGuard guard;
  CHECK(max_abs_diff(enc.encode(s1).pooled.value(), enc.encode(s2).pooled.value()) < 1e-5);

  const tabular::TabularSample just_a(forward, {{0, 0.3}});
  const tabular::TabularSample a_and_b(forward, {{0, 0.3}, {1, 2.0}});
  CHECK(max_abs_diff(enc.encode(just_a).pooled.value(), enc.encode(a_and_b).pooled.value()) > 1e-6);
}

TEST_CASE("[CLS] gradients reach the name rows of present columns only") {
  std::vector<tabular::Column> cols;
  for (const char* n : {"alpha", "beta", "gamma", "delta"}) cols.push_back({n, tabular::ColumnKind::continuous, {}});
  const auto schema = std::make_shared<const tabular::AttributeSchema>(cols);
  Rng rng(6);
  const TabularEncoder enc(tiny_encoders().tabular, *schema, rng);
  std::set<int> buckets;
  for (const auto& c : cols) buckets.insert(name_bucket(c.name, 64));
  REQUIRE(buckets.size() == 4);

  const Var w = Var::constant(random_matrix(rng, 1, 8));
  ag::Var table = enc.name_table();
  table.zero_grad();
  ag::backward(ag::sum(ag::mul(enc.encode(tabular::TabularSample(schema, {{0, 1.0}, {2, -0.5}})).pooled, w)));
  REQUIRE(table.has_grad());
  for (int c = 0; c < 4; ++c) {
    const double norm = table.grad().row(name_bucket(cols[c].name, 64)).norm();
    if (c == 0 || c == 2) {
      CHECK(norm > 0.0);
    } else {
      CHECK(norm == 0.0);
    }
  }
}

TEST_CASE("Matryoshka projections") {
  Rng rng(7);
  const ProjectionHead head(8, 16, {8, 16}, rng);
  const ProjectionSet set = head.project(Var::constant(random_matrix(rng, 3, 8)));
  REQUIRE(set.projections.size() == 2);
  CHECK(set.projections[0].cols() == 8);
  CHECK(set.projections[1].cols() == 16);
  for (const auto& p : set.projections) {
    for (int r = 0; r < 3; ++r) CHECK(p.value().row(r).norm() == doctest::Approx(1.0).epsilon(1e-6));
  }
  // The small width is the normalized prefix of the large one.
  const ag::Matrix prefix = set.projections[1].value().leftCols(8);
  for (int r = 0; r < 3; ++r) {
    CHECK(max_abs_diff(prefix.row(r) / prefix.row(r).norm(), set.projections[0].value().row(r)) < 1e-12);
  }

  ProjectionHead zeroed(8, 16, {4, 8}, rng);
  nn::ParameterList params;
  zeroed.register_parameters(params, "head");
  for (const auto& p : params.items()) {
    ag::Var v = p.var;
    v.mutable_value().setZero();
  }
  const ProjectionSet z = zeroed.project(Var::constant(ag::Matrix::Zero(1, 8)));
  for (const auto& p : z.projections) {
    CHECK(p.value().allFinite());
    CHECK(p.value().isZero());
  }
  CHECK_THROWS(head.project(Var::constant(ag::Matrix::Zero(1, 5))));
}

TEST_CASE("wide projection widths are accepted") {
  EncoderConfig cfg = tiny_encoders();
  cfg.projection_widths = {64, 128, 256, 512, 768};
  CHECK_NOTHROW(cfg.validate());
  cfg.projection_widths = {16, 8};
  CHECK_THROWS(cfg.validate());
}
