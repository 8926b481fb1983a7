#include "rovtl/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace rovtl::nn {

void ParameterList::add(std::string name, const Var& var) { items_.push_back({std::move(name), var}); }

void ParameterList::append(const ParameterList& other) {
  items_.insert(items_.end(), other.items_.begin(), other.items_.end());
}

std::vector<Var> ParameterList::vars() const {
  std::vector<Var> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p.var);
  return out;
}

std::size_t ParameterList::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += static_cast<std::size_t>(p.var.value().size());
  return n;
}

void ParameterList::zero_grad() {
  for (auto& p : items_) p.var.zero_grad();
}

void copy_values(const ParameterList& from, const ParameterList& to) {
  for (const auto& target : to.items()) {
    const NamedParameter* source = nullptr;
    for (const auto& candidate : from.items()) {
      if (candidate.name == target.name) {
        source = &candidate;
        break;
      }
    }
    if (!source) throw std::invalid_argument("copy_values: no parameter named '" + target.name + "'");
    if (source->var.rows() != target.var.rows() || source->var.cols() != target.var.cols()) {
      throw std::invalid_argument("copy_values: shape mismatch for '" + target.name + "'");
    }
    Var dst = target.var;
    dst.mutable_value() = source->var.value();
  }
}

Matrix uniform_matrix(Rng& rng, ag::Index rows, ag::Index cols, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (ag::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Linear::Linear(int in, int out, Rng& rng) {
  if (in <= 0 || out <= 0) throw std::invalid_argument("Linear: widths must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = Var::parameter(uniform_matrix(rng, in, out, bound));
  bias_ = Var::parameter(uniform_matrix(rng, 1, out, bound));
}

Var Linear::operator()(const Var& x) const { return ag::add(ag::matmul(x, weight_), bias_); }

void Linear::register_parameters(ParameterList& out, const std::string& prefix) const {
  out.add(prefix + ".weight", weight_);
  out.add(prefix + ".bias", bias_);
}

LayerNorm::LayerNorm(int width)
    : gamma_(Var::parameter(Matrix::Ones(1, width))), beta_(Var::parameter(Matrix::Zero(1, width))) {}

Var LayerNorm::operator()(const Var& x) const {
  return ag::add(ag::mul(ag::layer_norm_rows(x), gamma_), beta_);
}

void LayerNorm::register_parameters(ParameterList& out, const std::string& prefix) const {
  out.add(prefix + ".gamma", gamma_);
  out.add(prefix + ".beta", beta_);
}

Mlp::Mlp(int in, int hidden, int out, Rng& rng) : first_(in, hidden, rng), second_(hidden, out, rng) {}

Var Mlp::operator()(const Var& x) const { return second_(ag::relu(first_(x))); }

void Mlp::register_parameters(ParameterList& out, const std::string& prefix) const {
  first_.register_parameters(out, prefix + ".0");
  second_.register_parameters(out, prefix + ".1");
}

MultiHeadAttention::MultiHeadAttention(int width, int heads, Rng& rng)
    : width_(width),
      heads_(heads),
      query_(width, width, rng),
      key_(width, width, rng),
      value_(width, width, rng),
      output_(width, width, rng) {
  if (heads <= 0 || width % heads != 0) {
    throw std::invalid_argument("MultiHeadAttention: width " + std::to_string(width) +
                                " not divisible by " + std::to_string(heads) + " heads");
  }
}

Var MultiHeadAttention::operator()(const Var& queries, const Var& keys_values,
                                   std::vector<Matrix>* attention) const {
  if (queries.cols() != width_ || keys_values.cols() != width_) {
    throw std::invalid_argument("MultiHeadAttention: input width mismatch");
  }
  const Var q = query_(queries);
  const Var k = key_(keys_values);
  const Var v = value_(keys_values);
  const int head_width = width_ / heads_;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_width));
  std::vector<Var> per_head;
  per_head.reserve(heads_);
  if (attention) attention->clear();
  for (int h = 0; h < heads_; ++h) {
    const Var qh = ag::slice_cols(q, h * head_width, head_width);
    const Var kh = ag::slice_cols(k, h * head_width, head_width);
    const Var vh = ag::slice_cols(v, h * head_width, head_width);
    const Var weights = ag::softmax_rows(ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt));
    if (attention) attention->push_back(weights.value());
    per_head.push_back(ag::matmul(weights, vh));
  }
  const Var merged = heads_ == 1 ? per_head.front() : ag::concat_cols(per_head);
  return output_(merged);
}

void MultiHeadAttention::register_parameters(ParameterList& out, const std::string& prefix) const {
  query_.register_parameters(out, prefix + ".query");
  key_.register_parameters(out, prefix + ".key");
  value_.register_parameters(out, prefix + ".value");
  output_.register_parameters(out, prefix + ".output");
}

TransformerBlock::TransformerBlock(int width, int heads, int ffn_hidden, Rng& rng)
    : norm_attention_(width),
      attention_(width, heads, rng),
      norm_ffn_(width),
      ffn_(width, ffn_hidden, width, rng) {}

Var TransformerBlock::operator()(const Var& x) const {
  const Var normed = norm_attention_(x);
  const Var h = ag::add(x, attention_(normed, normed));
  return ag::add(h, ffn_(norm_ffn_(h)));
}

void TransformerBlock::register_parameters(ParameterList& out, const std::string& prefix) const {
  norm_attention_.register_parameters(out, prefix + ".norm_attention");
  attention_.register_parameters(out, prefix + ".attention");
  norm_ffn_.register_parameters(out, prefix + ".norm_ffn");
  ffn_.register_parameters(out, prefix + ".ffn");
}

Adam::Adam(std::vector<Var> parameters, AdamOptions options)
    : parameters_(std::move(parameters)), options_(options) {
  first_moment_.reserve(parameters_.size());
  second_moment_.reserve(parameters_.size());
  for (const auto& p : parameters_) {
    first_moment_.push_back(Matrix::Zero(p.rows(), p.cols()));
    second_moment_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step() {
  ++step_;
  const double correction1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    Var& p = parameters_[i];
    Matrix g = p.has_grad() ? p.grad() : Matrix::Zero(p.rows(), p.cols());
    if (options_.weight_decay != 0.0) g += options_.weight_decay * p.value();
    first_moment_[i] = options_.beta1 * first_moment_[i] + (1.0 - options_.beta1) * g;
    second_moment_[i] = options_.beta2 * second_moment_[i] + (1.0 - options_.beta2) * g.cwiseProduct(g);
    const Matrix m_hat = first_moment_[i] / correction1;
    const Matrix v_hat = second_moment_[i] / correction2;
    p.mutable_value().array() -=
        options_.learning_rate * m_hat.array() / (v_hat.array().sqrt() + options_.epsilon);
  }
}

void Adam::zero_grad() {
  for (auto& p : parameters_) p.zero_grad();
}

}  // namespace rovtl::nn
