#include "rovtl/pretrain.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace rovtl;
using namespace rovtl::pretrain;
using rovtl::testing::gradient_error;
using rovtl::testing::random_matrix;
using rovtl::testing::tiny_encoders;
using rovtl::testing::tiny_synth;

namespace {

ag::Matrix normalized(ag::Matrix m) {
  for (ag::Index r = 0; r < m.rows(); ++r) m.row(r).normalize();
  return m;
}

ag::Var constant(const ag::Matrix& m) { return ag::Var::constant(m); }

}  // namespace

TEST_CASE("identical embeddings give ln N") {
  const ag::Matrix same = normalized(ag::Matrix::Ones(4, 6));
  CHECK(std::abs(contrastive_loss(constant(same), constant(same), 0.1).item() - std::log(4.0)) < 1e-6);
}

TEST_CASE("two aligned pairs with orthogonal cross pairs at unit temperature") {
  ag::Matrix z(2, 2);
  z << 1, 0, 0, 1;
  // Row 0 logits (1, 0): -log(e / (e + 1)); same for every row and column.
  const double oracle = -std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(0.0)));
  CHECK(oracle == doctest::Approx(0.3133).epsilon(1e-4));
  CHECK(contrastive_loss(constant(z), constant(z), 1.0).item() == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("contrastive loss: non-negative, batch-permutation symmetric, differentiable") {
  Rng rng(1);
  const ag::Matrix a = normalized(random_matrix(rng, 5, 4));
  const ag::Matrix b = normalized(random_matrix(rng, 5, 4));
  const double loss = contrastive_loss(constant(a), constant(b), 0.2).item();
  CHECK(loss >= 0.0);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  ag::Matrix pa(5, 4), pb(5, 4);
  for (int i = 0; i < 5; ++i) {
    pa.row(i) = a.row(perm[i]);
    pb.row(i) = b.row(perm[i]);
  }
  CHECK(contrastive_loss(constant(pa), constant(pb), 0.2).item() == doctest::Approx(loss).epsilon(1e-12));

  // Hand evaluation of the symmetric cross-entropy.
  const ag::Matrix s = a * b.transpose() / 0.2;
  double rows = 0.0, cols = 0.0;
  for (int i = 0; i < 5; ++i) {
    rows += std::log(s.row(i).array().exp().sum()) - s(i, i);
    cols += std::log(s.col(i).array().exp().sum()) - s(i, i);
  }
  CHECK(loss == doctest::Approx((rows + cols) / 10.0).epsilon(1e-12));

  ag::Var va = ag::Var::parameter(a);
  CHECK(gradient_error(va, [&] { return contrastive_loss(va, constant(b), 0.2); }) < 1e-6);
  CHECK_THROWS(contrastive_loss(constant(a), constant(b), 0.0));
}

TEST_CASE("Matryoshka loss is the mean of the per-width losses") {
  Rng rng(2);
  encoders::ProjectionHead hi(8, 16, {8, 16}, rng);
  encoders::ProjectionHead ht(8, 16, {8, 16}, rng);
  const ag::Var xi = constant(random_matrix(rng, 6, 8));
  const ag::Var xt = constant(random_matrix(rng, 6, 8));
  const auto zi = hi.project(xi);
  const auto zt = ht.project(xt);
  std::vector<double> per_width;
  const double combined = matryoshka_contrastive_loss(zi, zt, 0.1, &per_width).item();
  const double w8 = contrastive_loss(zi.projections[0], zt.projections[0], 0.1).item();
  const double w16 = contrastive_loss(zi.projections[1], zt.projections[1], 0.1).item();
  CHECK(combined == doctest::Approx((w8 + w16) / 2).epsilon(1e-12));
  REQUIRE(per_width.size() == 2);
  CHECK(per_width[0] == doctest::Approx(w8));

  encoders::ProjectionHead single_i(8, 16, {16}, rng);
  encoders::ProjectionHead single_t(8, 16, {16}, rng);
  const auto si = single_i.project(xi);
  const auto st = single_t.project(xt);
  CHECK(matryoshka_contrastive_loss(si, st, 0.1).item() ==
        contrastive_loss(si.projections[0], st.projections[0], 0.1).item());

  // Equal per-width losses combine to that loss.
  encoders::ProjectionSet same_i{{4, 8}, {zi.projections[0], zi.projections[0]}};
  encoders::ProjectionSet same_t{{4, 8}, {zt.projections[0], zt.projections[0]}};
  CHECK(matryoshka_contrastive_loss(same_i, same_t, 0.1).item() == doctest::Approx(w8).epsilon(1e-12));
}

TEST_CASE("pretraining is deterministic and missing mode on one attribute equals none") {
  synth::SynthConfig sc = tiny_synth(16);
  sc.redundant = 1;
  sc.complementary = 1;
  sc.noise = 1;
  const synth::SynthDataset generated = synth::generate(sc);
  Dataset single = generated.data;
  for (auto& s : single.samples) s = s.restricted_to({s.present().front()});

  PretrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  auto run = [&](const Dataset& data, AugmentationMode mode) {
    cfg.mode = mode;
    PretrainModel model = PretrainModel::create(tiny_encoders(8), *data.schema, 5);
    std::vector<double> losses;
    for (const auto& row : run_pretraining(data, cfg, model)) losses.push_back(row.loss);
    return losses;
  };
  const auto a = run(generated.data, AugmentationMode::none);
  CHECK(a == run(generated.data, AugmentationMode::none));
  CHECK(run(single, AugmentationMode::missing) == run(single, AugmentationMode::none));
  CHECK(run(generated.data, AugmentationMode::corrupted).size() == 2);
}

TEST_CASE("300 steps on 64 pairs drive the loss well below chance") {
  const synth::SynthDataset generated = synth::generate(tiny_synth(64, 3));
  PretrainConfig cfg;
  cfg.batch_size = 32;
  cfg.epochs = 150;  // 2 steps per epoch
  cfg.optimizer.learning_rate = 3e-3;
  cfg.seed = 1;
  PretrainModel model = PretrainModel::create(tiny_encoders(8), *generated.data.schema, 1);
  const auto rows = run_pretraining(generated.data, cfg, model);
  REQUIRE(rows.back().step == 300);
  const double chance = std::log(32.0);
  INFO("first epoch " << rows.front().loss << ", last epoch " << rows.back().loss);
  CHECK(rows.back().loss < chance - 0.5);

  // 50-step moving average of epoch losses falls from the start to the end.
  auto window = [&](std::size_t from) {
    return std::accumulate(rows.begin() + from, rows.begin() + from + 25, 0.0,
                           [](double s, const PretrainMetricsRow& r) { return s + r.loss; }) / 25;
  };
  CHECK(window(rows.size() - 25) < window(0));
}
