#include "rovtl/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>

namespace rovtl::ag {

namespace {

thread_local bool g_grad_enabled = true;

using Backward = std::function<void(const Matrix&)>;

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Var make_result(Matrix value, std::vector<std::shared_ptr<Node>> parents, Backward fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->leaf = false;
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs_grad = needs_grad || p->requires_grad;
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(fn);
  }
  return Var::from_node(std::move(node));
}

Index broadcast_dim(Index a, Index b, const char* op) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw std::invalid_argument(std::string(op) + ": incompatible shapes");
}

Matrix broadcast_to(const Matrix& m, Index rows, Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

// Sums a broadcast gradient back down to an operand's shape.
Matrix reduce_to(const Matrix& g, Index rows, Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Matrix::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

template <typename Forward, typename GradA, typename GradB>
Var binary_broadcast(const Var& a, const Var& b, const char* name, Forward forward, GradA grad_a,
                     GradB grad_b) {
  const Index rows = broadcast_dim(a.rows(), b.rows(), name);
  const Index cols = broadcast_dim(a.cols(), b.cols(), name);
  Matrix av = broadcast_to(a.value(), rows, cols);
  Matrix bv = broadcast_to(b.value(), rows, cols);
  Matrix out = forward(av, bv);
  auto an = a.node();
  auto bn = b.node();
  return make_result(std::move(out), {an, bn},
                     [an, bn, av = std::move(av), bv = std::move(bv), grad_a, grad_b](const Matrix& g) {
                       if (an->requires_grad) {
                         an->accumulate(reduce_to(grad_a(g, av, bv), an->value.rows(), an->value.cols()));
                       }
                       if (bn->requires_grad) {
                         bn->accumulate(reduce_to(grad_b(g, av, bv), bn->value.rows(), bn->value.cols()));
                       }
                     });
}

template <typename Forward, typename Local>
Var unary(const Var& a, Forward forward, Local local_grad) {
  Matrix out = forward(a.value());
  auto an = a.node();
  Matrix y = out;
  return make_result(std::move(out), {an}, [an, y = std::move(y), local_grad](const Matrix& g) {
    an->accumulate(local_grad(g, an->value, y));
  });
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (g.rows() != value.rows() || g.cols() != value.cols()) {
    throw std::logic_error("gradient shape " + shape_str(g) + " does not match value " + shape_str(value));
  }
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::scalar(double v) { return Var(Matrix::Constant(1, 1, v), false); }

Var Var::from_node(std::shared_ptr<Node> node) {
  Var v;
  v.node_ = std::move(node);
  return v;
}

double Var::item() const {
  if (rows() != 1 || cols() != 1) throw std::logic_error("item() on non-scalar " + shape_str(value()));
  return node_->value(0, 0);
}

Var Var::detach() const { return Var(node_->value, false); }

void Var::zero_grad() { node_->grad.resize(0, 0); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) throw std::logic_error("backward() needs a scalar root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->leaf) n->grad.resize(0, 0);
  }
  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(n->grad);
  }
  for (Node* n : order) {
    if (!n->leaf) n->grad.resize(0, 0);
  }
}

Var add(const Var& a, const Var& b) {
  return binary_broadcast(
      a, b, "add", [](const Matrix& x, const Matrix& y) -> Matrix { return x + y; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; });
}

Var sub(const Var& a, const Var& b) {
  return binary_broadcast(
      a, b, "sub", [](const Matrix& x, const Matrix& y) -> Matrix { return x - y; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return -g; });
}

Var mul(const Var& a, const Var& b) {
  return binary_broadcast(
      a, b, "mul", [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseProduct(y); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseProduct(y); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return g.cwiseProduct(x); });
}

Var maximum(const Var& a, const Var& b) {
  // Ties route the gradient to the first operand.
  return binary_broadcast(
      a, b, "maximum", [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseMax(y); },
      [](const Matrix& g, const Matrix& x, const Matrix& y) -> Matrix {
        return (x.array() >= y.array()).select(g, 0.0);
      },
      [](const Matrix& g, const Matrix& x, const Matrix& y) -> Matrix {
        return (x.array() >= y.array()).select(Matrix::Zero(g.rows(), g.cols()), g);
      });
}

Var scale(const Var& a, double factor) {
  return unary(
      a, [factor](const Matrix& x) -> Matrix { return x * factor; },
      [factor](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g * factor; });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: " + shape_str(a.value()) + " @ " + shape_str(b.value()));
  }
  auto an = a.node();
  auto bn = b.node();
  return make_result(a.value() * b.value(), {an, bn}, [an, bn](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g * bn->value.transpose());
    if (bn->requires_grad) bn->accumulate(an->value.transpose() * g);
  });
}

Var transpose(const Var& a) {
  auto an = a.node();
  return make_result(a.value().transpose(), {an},
                     [an](const Matrix& g) { an->accumulate(g.transpose()); });
}

Var relu(const Var& a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.cwiseMax(0.0); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
        return (x.array() > 0.0).select(g, 0.0);
      });
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](const Matrix& x) -> Matrix {
        return x.unaryExpr([](double v) {
          if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
          const double e = std::exp(v);
          return e / (1.0 + e);
        });
      },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix {
        return g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
      });
}

Var tanh(const Var& a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().tanh().matrix(); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix {
        return g.cwiseProduct((1.0 - y.array().square()).matrix());
      });
}

Var exp(const Var& a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().exp().matrix(); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseProduct(y); });
}

Var log(const Var& a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().log().matrix(); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return g.cwiseQuotient(x); });
}

Var softmax_rows(const Var& a) {
  Matrix y = a.value();
  for (Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  auto an = a.node();
  Matrix saved = y;
  return make_result(std::move(y), {an}, [an, y = std::move(saved)](const Matrix& g) {
    Matrix gy = g.cwiseProduct(y);
    Eigen::VectorXd dot = gy.rowwise().sum();
    Matrix gx = gy - y.cwiseProduct(dot.replicate(1, y.cols()));
    an->accumulate(gx);
  });
}

Var log_softmax_rows(const Var& a) {
  Matrix y = a.value();
  for (Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    const double lse = m + std::log((y.row(r).array() - m).exp().sum());
    y.row(r).array() -= lse;
  }
  auto an = a.node();
  Matrix probs = y.array().exp().matrix();
  return make_result(std::move(y), {an}, [an, probs = std::move(probs)](const Matrix& g) {
    Eigen::VectorXd total = g.rowwise().sum();
    an->accumulate(g - probs.cwiseProduct(total.replicate(1, probs.cols())));
  });
}

Var layer_norm_rows(const Var& a, double eps) {
  const Matrix& x = a.value();
  const Index n = x.cols();
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  auto an = a.node();
  Matrix saved = xhat;
  return make_result(std::move(xhat), {an}, [an, xhat = std::move(saved), inv_std](const Matrix& g) {
    Matrix gx(g.rows(), g.cols());
    for (Index r = 0; r < g.rows(); ++r) {
      const double mean_g = g.row(r).mean();
      const double mean_gx = g.row(r).cwiseProduct(xhat.row(r)).mean();
      gx.row(r) = inv_std(r) * (g.row(r).array() - mean_g - xhat.row(r).array() * mean_gx);
    }
    an->accumulate(gx);
  });
}

Var l2_normalize_rows(const Var& a, double eps) {
  const Matrix& x = a.value();
  Eigen::VectorXd denom(x.rows());
  Matrix y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    denom(r) = std::max(x.row(r).norm(), eps);
    y.row(r) = x.row(r) / denom(r);
  }
  auto an = a.node();
  Matrix saved = y;
  return make_result(std::move(y), {an}, [an, y = std::move(saved), denom, eps](const Matrix& g) {
    Matrix gx(g.rows(), g.cols());
    for (Index r = 0; r < g.rows(); ++r) {
      if (denom(r) > eps) {
        gx.row(r) = (g.row(r) - y.row(r) * g.row(r).dot(y.row(r))) / denom(r);
      } else {
        gx.row(r) = g.row(r) / eps;
      }
    }
    an->accumulate(gx);
  });
}

Var sum(const Var& a) {
  auto an = a.node();
  return make_result(Matrix::Constant(1, 1, a.value().sum()), {an}, [an](const Matrix& g) {
    an->accumulate(Matrix::Constant(an->value.rows(), an->value.cols(), g(0, 0)));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  auto an = a.node();
  return make_result(Matrix::Constant(1, 1, a.value().mean()), {an}, [an, n](const Matrix& g) {
    an->accumulate(Matrix::Constant(an->value.rows(), an->value.cols(), g(0, 0) / n));
  });
}

Var mean_rows(const Var& a) {
  const Index n = a.rows();
  auto an = a.node();
  return make_result(a.value().colwise().mean(), {an}, [an, n](const Matrix& g) {
    an->accumulate(g.replicate(n, 1) / static_cast<double>(n));
  });
}

Var slice_rows(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("slice_rows");
  auto an = a.node();
  return make_result(a.value().middleRows(start, count), {an}, [an, start, count](const Matrix& g) {
    Matrix full = Matrix::Zero(an->value.rows(), an->value.cols());
    full.middleRows(start, count) = g;
    an->accumulate(full);
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::out_of_range("slice_cols");
  auto an = a.node();
  return make_result(a.value().middleCols(start, count), {an}, [an, start, count](const Matrix& g) {
    Matrix full = Matrix::Zero(an->value.rows(), an->value.cols());
    full.middleCols(start, count) = g;
    an->accumulate(full);
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::shared_ptr<Node>> nodes;
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
    nodes.push_back(p.node());
  }
  auto captured = nodes;
  return make_result(std::move(out), std::move(nodes), [captured](const Matrix& g) {
    Index offset = 0;
    for (const auto& n : captured) {
      const Index r = n->value.rows();
      if (n->requires_grad) n->accumulate(g.middleRows(offset, r));
      offset += r;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::shared_ptr<Node>> nodes;
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    nodes.push_back(p.node());
  }
  auto captured = nodes;
  return make_result(std::move(out), std::move(nodes), [captured](const Matrix& g) {
    Index offset = 0;
    for (const auto& n : captured) {
      const Index c = n->value.cols();
      if (n->requires_grad) n->accumulate(g.middleCols(offset, c));
      offset += c;
    }
  });
}

Var gather_row(const Var& table, Index index) {
  if (index < 0 || index >= table.rows()) throw std::out_of_range("gather_row");
  auto tn = table.node();
  return make_result(table.value().row(index), {tn}, [tn, index](const Matrix& g) {
    if (!tn->requires_grad) return;
    if (tn->grad.size() == 0) tn->grad = Matrix::Zero(tn->value.rows(), tn->value.cols());
    tn->grad.row(index) += g;
  });
}

Var pick(const Var& a, std::span<const int> indices) {
  if (static_cast<Index>(indices.size()) != a.rows()) throw std::invalid_argument("pick: row count");
  Matrix out(a.rows(), 1);
  for (Index r = 0; r < a.rows(); ++r) {
    const int c = indices[r];
    if (c < 0 || c >= a.cols()) throw std::out_of_range("pick: target index " + std::to_string(c));
    out(r, 0) = a.value()(r, c);
  }
  auto an = a.node();
  std::vector<int> idx(indices.begin(), indices.end());
  return make_result(std::move(out), {an}, [an, idx = std::move(idx)](const Matrix& g) {
    Matrix full = Matrix::Zero(an->value.rows(), an->value.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) full(static_cast<Index>(r), idx[r]) = g(static_cast<Index>(r), 0);
    an->accumulate(full);
  });
}

namespace {

Matrix im2col(const Matrix& input, int channels, const ConvGeometry& geo) {
  const int k = geo.kernel;
  const int oh = geo.out_height();
  const int ow = geo.out_width();
  Matrix cols = Matrix::Zero(static_cast<Index>(channels) * k * k, static_cast<Index>(oh) * ow);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Index row = (static_cast<Index>(c) * k + ky) * k + kx;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * geo.stride - geo.padding + ky;
          if (iy < 0 || iy >= geo.height) continue;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * geo.stride - geo.padding + kx;
            if (ix < 0 || ix >= geo.width) continue;
            cols(row, static_cast<Index>(y) * ow + x) = input(c, static_cast<Index>(iy) * geo.width + ix);
          }
        }
      }
    }
  }
  return cols;
}

Matrix col2im(const Matrix& cols, int channels, const ConvGeometry& geo) {
  const int k = geo.kernel;
  const int oh = geo.out_height();
  const int ow = geo.out_width();
  Matrix image = Matrix::Zero(channels, static_cast<Index>(geo.height) * geo.width);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Index row = (static_cast<Index>(c) * k + ky) * k + kx;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * geo.stride - geo.padding + ky;
          if (iy < 0 || iy >= geo.height) continue;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * geo.stride - geo.padding + kx;
            if (ix < 0 || ix >= geo.width) continue;
            image(c, static_cast<Index>(iy) * geo.width + ix) += cols(row, static_cast<Index>(y) * ow + x);
          }
        }
      }
    }
  }
  return image;
}

}  // namespace

Var conv2d(const Var& input, const Var& weight, const ConvGeometry& geo) {
  const int channels = static_cast<int>(input.rows());
  if (input.cols() != static_cast<Index>(geo.height) * geo.width) {
    throw std::invalid_argument("conv2d: input is not " + std::to_string(geo.height) + "x" +
                                std::to_string(geo.width));
  }
  if (weight.cols() != static_cast<Index>(channels) * geo.kernel * geo.kernel) {
    throw std::invalid_argument("conv2d: weight columns do not match C_in*k*k");
  }
  if (geo.out_height() <= 0 || geo.out_width() <= 0) throw std::invalid_argument("conv2d: empty output");
  Matrix cols = im2col(input.value(), channels, geo);
  Matrix out = weight.value() * cols;
  auto in = input.node();
  auto wn = weight.node();
  return make_result(std::move(out), {in, wn},
                     [in, wn, cols = std::move(cols), channels, geo](const Matrix& g) {
                       if (wn->requires_grad) wn->accumulate(g * cols.transpose());
                       if (in->requires_grad) {
                         in->accumulate(col2im(wn->value.transpose() * g, channels, geo));
                       }
                     });
}

Var cross_entropy(const Var& logits, std::span<const int> targets) {
  return neg(mean(pick(log_softmax_rows(logits), targets)));
}

Var bce_with_logits(const Var& logits, const Matrix& targets) {
  const Matrix& x = logits.value();
  if (x.rows() != targets.rows() || x.cols() != targets.cols()) {
    throw std::invalid_argument("bce_with_logits: shape mismatch");
  }
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    const double t = targets.data()[i];
    total += std::max(v, 0.0) - v * t + std::log1p(std::exp(-std::abs(v)));
  }
  auto ln = logits.node();
  return make_result(Matrix::Constant(1, 1, total / n), {ln}, [ln, targets, n](const Matrix& g) {
    Matrix p = ln->value.unaryExpr([](double v) {
      return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    });
    ln->accumulate((p - targets) * (g(0, 0) / n));
  });
}

Var huber(const Var& predictions, const Matrix& targets, double delta) {
  const Matrix& x = predictions.value();
  if (x.rows() != targets.rows() || x.cols() != targets.cols()) {
    throw std::invalid_argument("huber: shape mismatch");
  }
  const double n = static_cast<double>(x.size());
  Matrix residual = x - targets;
  double total = 0.0;
  for (Index i = 0; i < residual.size(); ++i) {
    const double r = std::abs(residual.data()[i]);
    total += r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
  }
  auto pn = predictions.node();
  return make_result(Matrix::Constant(1, 1, total / n), {pn},
                     [pn, residual = std::move(residual), delta, n](const Matrix& g) {
                       Matrix d = residual.unaryExpr([delta](double r) { return std::clamp(r, -delta, delta); });
                       pn->accumulate(d * (g(0, 0) / n));
                     });
}

}  // namespace rovtl::ag
