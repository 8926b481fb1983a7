#include "rovtl/layers.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace rovtl;
using rovtl::testing::gradient_error;
using rovtl::testing::random_matrix;

TEST_CASE("attention rows are distributions and match a hand computation") {
  Rng rng(3);
  nn::MultiHeadAttention mha(4, 2, rng);
  const ag::Var q = ag::Var::constant(random_matrix(rng, 3, 4));
  const ag::Var kv = ag::Var::constant(random_matrix(rng, 5, 4));
  std::vector<ag::Matrix> attention;
  const ag::Matrix out = mha(q, kv, &attention).value();
  REQUIRE(attention.size() == 2);

  const ag::Matrix Q = q.value() * mha.query().weight().value() + mha.query().bias().value().replicate(3, 1);
  const ag::Matrix K = kv.value() * mha.key().weight().value() + mha.key().bias().value().replicate(5, 1);
  const ag::Matrix V = kv.value() * mha.value().weight().value() + mha.value().bias().value().replicate(5, 1);
  ag::Matrix merged(3, 4);
  for (int h = 0; h < 2; ++h) {
    CHECK(attention[h].rows() == 3);
    CHECK(attention[h].cols() == 5);
    ag::Matrix logits = Q.middleCols(h * 2, 2) * K.middleCols(h * 2, 2).transpose() / std::sqrt(2.0);
    for (int r = 0; r < 3; ++r) {
      CHECK(attention[h].row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
      const double m = logits.row(r).maxCoeff();
      ag::Matrix e = (logits.row(r).array() - m).exp().matrix();
      e /= e.sum();
      CHECK((e - attention[h].row(r)).cwiseAbs().maxCoeff() < 1e-12);
    }
    merged.middleCols(h * 2, 2) = attention[h] * V.middleCols(h * 2, 2);
  }
  const ag::Matrix expected = merged * mha.output().weight().value() + mha.output().bias().value().replicate(3, 1);
  CHECK((expected - out).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("transformer block gradients match finite differences") {
  Rng rng(4);
  nn::TransformerBlock block(4, 2, 8, rng);
  ag::Var x = ag::Var::parameter(random_matrix(rng, 3, 4));
  const ag::Var w = ag::Var::constant(random_matrix(rng, 3, 4));
  CHECK(gradient_error(x, [&] { return ag::sum(ag::mul(block(x), w)); }) < 1e-5);

  nn::ParameterList params;
  block.register_parameters(params, "block");
  for (const auto& p : params.items()) {
    INFO(p.name);
    CHECK(gradient_error(p.var, [&] { return ag::sum(ag::mul(block(x), w)); }) < 1e-5);
  }
}

TEST_CASE("parameter lists keep registration order and copy by name") {
  Rng rng(5);
  nn::Mlp a(3, 4, 2, rng);
  nn::Mlp b(3, 4, 2, rng);
  nn::ParameterList pa, pb;
  a.register_parameters(pa, "m");
  b.register_parameters(pb, "m");
  REQUIRE(pa.items().size() == 4);
  CHECK(pa.items()[0].name == "m.0.weight");
  CHECK(pa.scalar_count() == 3 * 4 + 4 + 4 * 2 + 2);

  nn::copy_values(pa, pb);
  for (std::size_t i = 0; i < pa.items().size(); ++i) CHECK(pa.items()[i].var.value() == pb.items()[i].var.value());

  nn::ParameterList other;
  b.register_parameters(other, "n");
  CHECK_THROWS(nn::copy_values(other, pb));
}

TEST_CASE("Adam first step moves each weight by the learning rate against the gradient sign") {
  ag::Var w = ag::Var::parameter(ag::Matrix::Constant(1, 3, 1.0));
  nn::AdamOptions o;
  o.learning_rate = 0.01;
  o.weight_decay = 0.0;
  nn::Adam adam({w}, o);
  ag::Matrix c(1, 3);
  c << 2.0, -0.5, 0.0;
  ag::backward(ag::sum(ag::mul(w, ag::Var::constant(c))));
  adam.step();
  CHECK(w.value()(0, 0) == doctest::Approx(0.99).epsilon(1e-9));
  CHECK(w.value()(0, 1) == doctest::Approx(1.01).epsilon(1e-9));
  CHECK(w.value()(0, 2) == 1.0);
  CHECK(adam.steps_taken() == 1);

  adam.zero_grad();
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("Adam minimizes a quadratic") {
  ag::Var w = ag::Var::parameter(ag::Matrix::Constant(1, 2, 3.0));
  nn::AdamOptions o;
  o.learning_rate = 0.05;
  o.weight_decay = 0.0;
  nn::Adam adam({w}, o);
  for (int i = 0; i < 500; ++i) {
    adam.zero_grad();
    ag::backward(ag::sum(ag::mul(w, w)));
    adam.step();
  }
  CHECK(w.value().cwiseAbs().maxCoeff() < 0.05);
}
