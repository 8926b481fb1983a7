#pragma once

#include "rovtl/autograd.hpp"
#include "rovtl/rng.hpp"

#include <string>
#include <vector>

namespace rovtl::nn {

using ag::Matrix;
using ag::Var;

struct NamedParameter {
  std::string name;
  Var var;
};

// Ordered collection of parameter handles. Order is registration order and
// is what checkpoints and the optimizer iterate over.
class ParameterList {
 public:
  void add(std::string name, const Var& var);
  void append(const ParameterList& other);

  const std::vector<NamedParameter>& items() const& { return items_; }
  std::vector<NamedParameter> items() && { return std::move(items_); }
  std::vector<Var> vars() const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<NamedParameter> items_;
};

// Copies values from `from` into the same-named entries of `to`; every
// name in `to` must exist in `from` with the same shape.
void copy_values(const ParameterList& from, const ParameterList& to);

Matrix uniform_matrix(Rng& rng, ag::Index rows, ag::Index cols, double bound);

class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, Rng& rng);

  Var operator()(const Var& x) const;
  void register_parameters(ParameterList& out, const std::string& prefix) const;

  int in_features() const { return static_cast<int>(weight_.rows()); }
  int out_features() const { return static_cast<int>(weight_.cols()); }
  Var& weight() { return weight_; }
  Var& bias() { return bias_; }
  const Var& weight() const { return weight_; }
  const Var& bias() const { return bias_; }

 private:
  Var weight_;  // in x out
  Var bias_;    // 1 x out
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(int width);

  Var operator()(const Var& x) const;
  void register_parameters(ParameterList& out, const std::string& prefix) const;

 private:
  Var gamma_;
  Var beta_;
};

// Two-layer perceptron with a ReLU in between.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int in, int hidden, int out, Rng& rng);

  Var operator()(const Var& x) const;
  void register_parameters(ParameterList& out, const std::string& prefix) const;

  Linear& first() { return first_; }
  Linear& second() { return second_; }

 private:
  Linear first_;
  Linear second_;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(int width, int heads, Rng& rng);

  // queries: Lq x d, keys_values: Lk x d. When `attention` is non-null it
  // receives one Lq x Lk row-stochastic matrix per head.
  Var operator()(const Var& queries, const Var& keys_values, std::vector<Matrix>* attention = nullptr) const;
  void register_parameters(ParameterList& out, const std::string& prefix) const;

  int heads() const { return heads_; }
  int width() const { return width_; }
  const Linear& query() const { return query_; }
  const Linear& key() const { return key_; }
  const Linear& value() const { return value_; }
  const Linear& output() const { return output_; }

 private:
  int width_ = 0;
  int heads_ = 1;
  Linear query_;
  Linear key_;
  Linear value_;
  Linear output_;
};

// Pre-norm encoder block: x + MHA(LN(x)), then x + FFN(LN(x)).
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(int width, int heads, int ffn_hidden, Rng& rng);

  Var operator()(const Var& x) const;
  void register_parameters(ParameterList& out, const std::string& prefix) const;

 private:
  LayerNorm norm_attention_;
  MultiHeadAttention attention_;
  LayerNorm norm_ffn_;
  Mlp ffn_;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Coupled L2 penalty added to the gradient.
  double weight_decay = 1e-4;
};

class Adam {
 public:
  Adam(std::vector<Var> parameters, AdamOptions options);

  void step();
  void zero_grad();
  const std::vector<Var>& parameters() const { return parameters_; }
  const AdamOptions& options() const { return options_; }
  long steps_taken() const { return step_; }

 private:
  std::vector<Var> parameters_;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
  AdamOptions options_;
  long step_ = 0;
};

}  // namespace rovtl::nn
