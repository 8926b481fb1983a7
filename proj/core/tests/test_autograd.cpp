#include "rovtl/autograd.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <array>

using namespace rovtl;
using rovtl::testing::gradient_error;
using rovtl::testing::random_matrix;

namespace {

ag::Var param(Rng& rng, int r, int c) { return ag::Var::parameter(random_matrix(rng, r, c)); }

}  // namespace

TEST_CASE("elementwise and matrix ops match finite differences") {
  Rng rng(11);
  ag::Var a = param(rng, 3, 4);
  ag::Var b = param(rng, 4, 2);
  ag::Var c = param(rng, 3, 4);

  CHECK(gradient_error(a, [&] { return ag::sum(ag::matmul(a, b)); }) < 1e-6);
  CHECK(gradient_error(b, [&] { return ag::sum(ag::tanh(ag::matmul(a, b))); }) < 1e-6);
  CHECK(gradient_error(a, [&] { return ag::mean(ag::mul(ag::sigmoid(a), c)); }) < 1e-6);
  CHECK(gradient_error(a, [&] { return ag::sum(ag::exp(ag::scale(a, 0.3))); }) < 1e-6);
  CHECK(gradient_error(a, [&] { return ag::sum(ag::log(ag::add(ag::mul(a, a), ag::Var::constant(ag::Matrix::Ones(3, 4))))); }) < 1e-6);
  CHECK(gradient_error(a, [&] { return ag::sum(ag::transpose(ag::sub(a, ag::neg(c)))); }) < 1e-6);
  CHECK(gradient_error(a, [&] { return ag::sum(ag::mul(ag::maximum(a, c), c)); }) < 1e-6);
  CHECK(gradient_error(a, [&] { return ag::sum(ag::mul(ag::relu(a), c)); }) < 1e-6);
}

TEST_CASE("row-wise normalizations match finite differences") {
  Rng rng(12);
  ag::Var a = param(rng, 3, 5);
  const ag::Var w = ag::Var::constant(random_matrix(rng, 3, 5));

  CHECK(gradient_error(a, [&] { return ag::sum(ag::mul(ag::softmax_rows(a), w)); }) < 1e-6);
  CHECK(gradient_error(a, [&] { return ag::sum(ag::mul(ag::log_softmax_rows(a), w)); }) < 1e-6);
  CHECK(gradient_error(a, [&] { return ag::sum(ag::mul(ag::layer_norm_rows(a), w)); }) < 1e-5);
  CHECK(gradient_error(a, [&] { return ag::sum(ag::mul(ag::l2_normalize_rows(a), w)); }) < 1e-6);
}

TEST_CASE("shape ops route gradients to the right entries") {
  Rng rng(13);
  ag::Var a = param(rng, 4, 3);
  ag::Var b = param(rng, 2, 3);
  const ag::Var w = ag::Var::constant(random_matrix(rng, 6, 3));
  const std::array<ag::Var, 2> rows{a, b};
  CHECK(gradient_error(a, [&] { return ag::sum(ag::mul(ag::concat_rows(rows), w)); }) < 1e-6);
  CHECK(gradient_error(b, [&] { return ag::sum(ag::mul(ag::mean_rows(ag::slice_rows(a, 1, 2)), b)); }) < 1e-6);
  const std::array<ag::Var, 2> cols{a, a};
  CHECK(gradient_error(a, [&] { return ag::sum(ag::slice_cols(ag::concat_cols(cols), 2, 3)); }) < 1e-6);
  CHECK(gradient_error(a, [&] { return ag::sum(ag::mul(ag::gather_row(a, 2), ag::gather_row(a, 2))); }) < 1e-6);
  const std::array<int, 4> picks{0, 2, 1, 2};
  CHECK(gradient_error(a, [&] { return ag::sum(ag::exp(ag::pick(a, picks))); }) < 1e-6);

  a.zero_grad();
  ag::backward(ag::sum(ag::gather_row(a, 1)));
  CHECK(a.grad().row(1).sum() == doctest::Approx(3.0));
  CHECK(a.grad().row(0).isZero());
  CHECK(a.grad().row(3).isZero());
}

TEST_CASE("conv2d matches a direct loop and finite differences") {
  Rng rng(14);
  ag::ConvGeometry g;
  g.height = 5;
  g.width = 4;
  g.kernel = 3;
  g.stride = 2;
  g.padding = 1;
  ag::Var input = param(rng, 2, g.height * g.width);
  ag::Var weight = param(rng, 3, 2 * 9);
  const ag::Matrix out = ag::conv2d(input, weight, g).value();
  REQUIRE(out.rows() == 3);
  REQUIRE(out.cols() == g.out_height() * g.out_width());

  for (int o = 0; o < 3; ++o) {
    for (int oy = 0; oy < g.out_height(); ++oy) {
      for (int ox = 0; ox < g.out_width(); ++ox) {
        double expected = 0.0;
        for (int ci = 0; ci < 2; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const int y = oy * 2 - 1 + ky;
              const int x = ox * 2 - 1 + kx;
              if (y < 0 || x < 0 || y >= g.height || x >= g.width) continue;
              expected += weight.value()(o, ci * 9 + ky * 3 + kx) * input.value()(ci, y * g.width + x);
            }
          }
        }
        CHECK(out(o, oy * g.out_width() + ox) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
  const ag::Var w = ag::Var::constant(random_matrix(rng, 3, g.out_height() * g.out_width()));
  CHECK(gradient_error(input, [&] { return ag::sum(ag::mul(ag::conv2d(input, weight, g), w)); }) < 1e-6);
  CHECK(gradient_error(weight, [&] { return ag::sum(ag::mul(ag::conv2d(input, weight, g), w)); }) < 1e-6);
}

TEST_CASE("loss ops: values at known points and gradients") {
  ag::Matrix confident = ag::Matrix::Zero(1, 3);
  confident(0, 1) = 20.0;
  const std::array<int, 1> one{1};
  CHECK(ag::cross_entropy(ag::Var::constant(confident), one).item() < 1e-6);

  const ag::Matrix target_one = ag::Matrix::Ones(1, 1);
  CHECK(ag::bce_with_logits(ag::Var::constant(ag::Matrix::Zero(1, 1)), target_one).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  ag::Matrix pred(1, 3);
  pred << 0.5, 3.0, -2.0;
  ag::Matrix tgt = ag::Matrix::Zero(1, 3);
  // 0.5 * 0.25, 1 * (3 - 0.5), 1 * (2 - 0.5)
  CHECK(ag::huber(ag::Var::constant(pred), tgt).item() == doctest::Approx((0.125 + 2.5 + 1.5) / 3.0));
  CHECK(ag::huber(ag::Var::constant(tgt), tgt).item() == 0.0);

  Rng rng(15);
  ag::Var logits = param(rng, 4, 3);
  const std::array<int, 4> classes{0, 2, 1, 1};
  CHECK(gradient_error(logits, [&] { return ag::cross_entropy(logits, classes); }) < 1e-6);
  ag::Matrix bits(4, 3);
  bits << 1, 0, 1, 0, 0, 1, 1, 1, 0, 0, 1, 0;
  CHECK(gradient_error(logits, [&] { return ag::bce_with_logits(logits, bits); }) < 1e-6);
  const ag::Matrix real = random_matrix(rng, 4, 3, 2.0);
  CHECK(gradient_error(logits, [&] { return ag::huber(logits, real); }) < 1e-6);
}

TEST_CASE("gradients accumulate across backward calls until cleared") {
  ag::Var x = ag::Var::parameter(ag::Matrix::Constant(1, 1, 2.0));
  ag::backward(ag::mul(x, x));
  CHECK(x.grad()(0, 0) == doctest::Approx(4.0));
  ag::backward(ag::scale(x, 3.0));
  CHECK(x.grad()(0, 0) == doctest::Approx(7.0));
  x.zero_grad();
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("detach and NoGradGuard stop gradient flow") {
  ag::Var x = ag::Var::parameter(ag::Matrix::Constant(1, 1, 2.0));
  ag::backward(ag::add(ag::mul(x.detach(), x.detach()), ag::scale(x, 1.0)));
  CHECK(x.grad()(0, 0) == doctest::Approx(1.0));

  x.zero_grad();
  ag::Var y;
  {
    ag::NoGradGuard guard;
    CHECK_FALSE(ag::grad_enabled());
    y = ag::mul(x, x);
  }
  CHECK(ag::grad_enabled());
  CHECK_FALSE(y.requires_grad());
  CHECK(y.item() == 4.0);
}
