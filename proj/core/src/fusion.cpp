#include "rovtl/fusion.hpp"

#include <stdexcept>
#include <string>

namespace rovtl::fusion {

std::string_view to_string(FusionKind kind) {
  switch (kind) {
    case FusionKind::gated:
      return "gated";
    case FusionKind::concat:
      return "concat";
    case FusionKind::max:
      return "max";
  }
  return "gated";
}

FusionKind parse_fusion_kind(std::string_view text) {
  if (text == "gated") return FusionKind::gated;
  if (text == "concat") return FusionKind::concat;
  if (text == "max") return FusionKind::max;
  throw std::invalid_argument("unknown fusion kind '" + std::string(text) + "'");
}

void FusionConfig::validate() const {
  if (width <= 0 || ffn_hidden <= 0 || depth <= 0 || gate_hidden < 0) {
    throw std::invalid_argument("fusion: widths and depth must be positive");
  }
  if (self_heads <= 0 || cross_heads <= 0 || width % self_heads != 0 || width % cross_heads != 0) {
    throw std::invalid_argument("fusion: width must be divisible by the head counts");
  }
  if (fixed_gate && !(*fixed_gate >= 0.0 && *fixed_gate <= 1.0)) {
    throw std::invalid_argument("fusion: fixed gate outside [0, 1]");
  }
}

FusionModule::FusionModule(int image_width, int tabular_width, const FusionConfig& config, Rng& rng)
    : config_(config), image_width_(image_width), tabular_width_(tabular_width) {
  config_.validate();
  const int d = config_.width;
  image_projection_ = nn::Linear(image_width, d, rng);
  tabular_projection_ = nn::Linear(tabular_width, d, rng);
  switch (config_.kind) {
    case FusionKind::gated: {
      const int hidden = config_.gate_hidden > 0 ? config_.gate_hidden : std::max(1, d / 2);
      gate_ = nn::Mlp(d, hidden, 1, rng);
      for (int l = 0; l < config_.depth; ++l) {
        layers_.push_back(Layer{nn::LayerNorm(d), nn::MultiHeadAttention(d, config_.self_heads, rng),
                                nn::MultiHeadAttention(d, config_.cross_heads, rng), nn::LayerNorm(d),
                                nn::Mlp(d, config_.ffn_hidden, d, rng)});
      }
      break;
    }
    case FusionKind::concat:
      baseline_ffn_ = nn::Mlp(image_width + tabular_width, config_.ffn_hidden, d, rng);
      break;
    case FusionKind::max:
      baseline_ffn_ = nn::Mlp(d, config_.ffn_hidden, d, rng);
      break;
  }
}

int FusionModule::output_width() const { return config_.width; }

Var FusionModule::gate_weight(const Var& projected_cls) const {
  if (projected_cls.rows() != 1 || projected_cls.cols() != config_.width) {
    throw std::invalid_argument("gate_weight: expected a 1 x " + std::to_string(config_.width) + " [CLS] row");
  }
  return ag::sigmoid(gate_(projected_cls));
}

FusionOutput FusionModule::fuse(const encoders::FeatureBundle& image, const encoders::FeatureBundle& tabular) const {
  if (image.width() != image_width_ || tabular.width() != tabular_width_) {
    throw std::invalid_argument("fuse: bundle widths (" + std::to_string(image.width()) + ", " +
                                std::to_string(tabular.width()) + ") do not match the module (" +
                                std::to_string(image_width_) + ", " + std::to_string(tabular_width_) + ")");
  }
  if (config_.kind == FusionKind::gated) return fuse_gated(image, tabular);

  FusionOutput out;
  if (config_.kind == FusionKind::concat) {
    out.v_m = fuse_concat(image, tabular);
  } else {
    out.v_m = fuse_max(image_projection_(image.pooled), tabular_projection_(tabular.pooled));
  }
  out.embedding = baseline_ffn_(out.v_m);
  out.trace.v_m = out.v_m.value();
  return out;
}

FusionOutput FusionModule::fuse_gated(const encoders::FeatureBundle& image,
                                      const encoders::FeatureBundle& tabular) const {
  const Var image_tokens = image_projection_(image.tokens);
  const Var tabular_tokens = tabular_projection_(tabular.tokens);
  const int attributes = tabular.length() - 1;

  FusionOutput out;
  if (config_.fixed_gate) {
    out.gate = Var::scalar(*config_.fixed_gate);
  } else {
    out.gate = gate_weight(ag::slice_rows(tabular_tokens, 0, 1));
  }
  const Var attribute_tokens = attributes > 0 ? ag::slice_rows(tabular_tokens, 1, attributes) : Var();

  Var x = image_tokens;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const Var normed = layer.norm_self(x);
    out.v_hat = ag::add(x, layer.self(normed, normed));
    if (attributes > 0) {
      std::vector<Matrix>* attention = l + 1 == layers_.size() ? &out.trace.attention : nullptr;
      out.cross = layer.cross(out.v_hat, attribute_tokens, attention);
      out.v_m = ag::add(out.v_hat, ag::mul(out.cross, out.gate));
    } else {
      out.cross = Var();
      out.v_m = out.v_hat;
    }
    x = ag::add(out.v_m, layer.ffn(layer.norm_ffn(out.v_m)));
  }
  out.embedding = ag::mean_rows(x);
  out.trace.gate = out.gate.item();
  out.trace.cross_attention_applied = attributes > 0;
  out.trace.v_hat = out.v_hat.value();
  out.trace.v_m = out.v_m.value();
  return out;
}

void FusionModule::register_parameters(nn::ParameterList& out, const std::string& prefix) const {
  image_projection_.register_parameters(out, prefix + ".image_projection");
  tabular_projection_.register_parameters(out, prefix + ".tabular_projection");
  if (config_.kind == FusionKind::gated) {
    gate_.register_parameters(out, prefix + ".gate");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const std::string p = prefix + ".layer" + std::to_string(l);
      layers_[l].norm_self.register_parameters(out, p + ".norm_self");
      layers_[l].self.register_parameters(out, p + ".self_attention");
      layers_[l].cross.register_parameters(out, p + ".cross_attention");
      layers_[l].norm_ffn.register_parameters(out, p + ".norm_ffn");
      layers_[l].ffn.register_parameters(out, p + ".ffn");
    }
  } else {
    baseline_ffn_.register_parameters(out, prefix + ".ffn");
  }
}

Var fuse_concat(const Var& image_pooled, const Var& tabular_pooled) {
  if (image_pooled.rows() != tabular_pooled.rows()) throw std::invalid_argument("fuse_concat: row mismatch");
  const Var parts[] = {image_pooled, tabular_pooled};
  return ag::concat_cols(parts);
}

Var fuse_concat(const encoders::FeatureBundle& image, const encoders::FeatureBundle& tabular) {
  return fuse_concat(image.pooled, tabular.pooled);
}

Var fuse_max(const Var& image_pooled, const Var& tabular_pooled) {
  if (image_pooled.rows() != tabular_pooled.rows() || image_pooled.cols() != tabular_pooled.cols()) {
    throw std::invalid_argument("fuse_max: pooled widths differ");
  }
  return ag::maximum(image_pooled, tabular_pooled);
}

Var fuse_max(const encoders::FeatureBundle& image, const encoders::FeatureBundle& tabular) {
  return fuse_max(image.pooled, tabular.pooled);
}

std::vector<double> aggregate_attention(const FusionTrace& trace) {
  if (trace.attention.empty() || trace.attention.front().cols() == 0) {
    throw std::invalid_argument("aggregate_attention: trace has no attribute columns");
  }
  const Matrix& first = trace.attention.front();
  Matrix head_mean = Matrix::Zero(first.rows(), first.cols());
  for (const Matrix& head : trace.attention) {
    if (head.rows() != first.rows() || head.cols() != first.cols()) {
      throw std::invalid_argument("aggregate_attention: heads have different shapes");
    }
    head_mean += head;
  }
  head_mean /= static_cast<double>(trace.attention.size());
  const Matrix per_attribute = head_mean.colwise().mean();
  return std::vector<double>(per_attribute.data(), per_attribute.data() + per_attribute.size());
}

}  // namespace rovtl::fusion
