#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every value in the model graph is a 2-D matrix: vectors are
// 1 x d rows and scalars are 1 x 1. Graphs are built eagerly while the
// forward pass runs and released when the last Var handle goes away.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace rovtl::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  // Empty until something flows into it. Leaf gradients persist across
  // backward() calls until explicitly zeroed; interior gradients do not.
  Matrix grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Matrix& upstream)> backward_fn;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  static Var constant(Matrix value) { return Var(std::move(value), false); }
  static Var parameter(Matrix value) { return Var(std::move(value), true); }
  static Var scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  bool requires_grad() const { return node_->requires_grad; }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double item() const;

  // New leaf sharing this value, cut off from the graph.
  Var detach() const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }

  static Var from_node(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

// Runs reverse accumulation from a 1 x 1 root.
void backward(const Var& root);

// While alive, ops on this thread do not record the graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Elementwise ops broadcast a 1-row or 1-column operand (or 1 x 1) against
// the other operand's shape.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var maximum(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var neg(const Var& a);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);

Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
// Per-row standardization without affine parameters.
Var layer_norm_rows(const Var& a, double eps = 1e-5);
// Row-wise x / max(||x||, eps).
Var l2_normalize_rows(const Var& a, double eps = 1e-12);

Var sum(const Var& a);
Var mean(const Var& a);
// Column-wise mean over rows: (n x d) -> (1 x d).
Var mean_rows(const Var& a);

Var slice_rows(const Var& a, Index start, Index count);
Var slice_cols(const Var& a, Index start, Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);

// Row `index` of a (table x d) parameter, as 1 x d.
Var gather_row(const Var& table, Index index);
// out[r] = a[r, indices[r]], shape (n x 1).
Var pick(const Var& a, std::span<const int> indices);

struct ConvGeometry {
  int height = 0;
  int width = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 0;

  int out_height() const { return (height + 2 * padding - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * padding - kernel) / stride + 1; }
};

// input: (C_in x H*W) channel-major image; weight: (C_out x C_in*k*k).
// Returns (C_out x H_out*W_out). Bias is added separately.
Var conv2d(const Var& input, const Var& weight, const ConvGeometry& geometry);

// Mean-reduced losses over the batch rows.
Var cross_entropy(const Var& logits, std::span<const int> targets);
Var bce_with_logits(const Var& logits, const Matrix& targets);
Var huber(const Var& predictions, const Matrix& targets, double delta = 1.0);

}  // namespace rovtl::ag
