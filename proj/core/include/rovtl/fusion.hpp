#pragma once

// Image-tabular fusion. The gated variant projects both token sequences to a
// shared width d, runs self-attention over the image tokens (v_hat), lets
// the image tokens cross-attend to the tabular attribute tokens, and adds
// that term scaled by a sigmoid gate computed from the tabular [CLS]:
//
//   v_m = v_hat + w * CrossAttention(v_hat, tabular attributes)
//
// followed by a feed-forward layer. [CLS] is not a key/value, and with zero
// attributes the cross-attention term is skipped so v_m == v_hat.

#include "rovtl/encoders.hpp"
#include "rovtl/layers.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace rovtl::fusion {

using ag::Matrix;
using ag::Var;

enum class FusionKind { gated, concat, max };

std::string_view to_string(FusionKind kind);
FusionKind parse_fusion_kind(std::string_view text);

struct FusionConfig {
  FusionKind kind = FusionKind::gated;
  int width = 16;
  int self_heads = 2;
  int cross_heads = 2;
  int gate_hidden = 0;  // 0 selects width / 2
  int ffn_hidden = 32;
  int depth = 1;
  // When set, replaces the learned gate output (1.0 disables gating).
  std::optional<double> fixed_gate;

  void validate() const;
};

struct FusionTrace {
  double gate = 0.0;
  bool cross_attention_applied = false;
  // One (image tokens x attributes) row-stochastic matrix per head, taken
  // from the last cross-attention layer.
  std::vector<Matrix> attention;
  Matrix v_hat;
  Matrix v_m;
};

struct FusionOutput {
  Var v_hat;      // last layer's self-attention output
  Var cross;      // raw cross-attention output; undefined when skipped
  Var gate;       // 1 x 1; undefined for non-gated kinds
  Var v_m;
  Var embedding;  // 1 x output_width, fed to the task head
  FusionTrace trace;
};

class FusionModule {
 public:
  FusionModule() = default;
  FusionModule(int image_width, int tabular_width, const FusionConfig& config, Rng& rng);

  FusionOutput fuse(const encoders::FeatureBundle& image, const encoders::FeatureBundle& tabular) const;
  // sigmoid(MLP(cls)) for a 1 x d projected [CLS] row.
  Var gate_weight(const Var& projected_cls) const;
  Var project_image(const Var& tokens) const { return image_projection_(tokens); }
  Var project_tabular(const Var& tokens) const { return tabular_projection_(tokens); }

  int output_width() const;
  const FusionConfig& config() const { return config_; }
  FusionConfig& mutable_config() { return config_; }
  void register_parameters(nn::ParameterList& out, const std::string& prefix) const;

  nn::Mlp& gate_mlp() { return gate_; }
  const nn::MultiHeadAttention& cross_attention(std::size_t layer) const { return layers_.at(layer).cross; }

 private:
  struct Layer {
    nn::LayerNorm norm_self;
    nn::MultiHeadAttention self;
    nn::MultiHeadAttention cross;
    nn::LayerNorm norm_ffn;
    nn::Mlp ffn;
  };

  FusionOutput fuse_gated(const encoders::FeatureBundle& image, const encoders::FeatureBundle& tabular) const;

  FusionConfig config_;
  int image_width_ = 0;
  int tabular_width_ = 0;
  nn::Linear image_projection_;
  nn::Linear tabular_projection_;
  nn::Mlp gate_;
  std::vector<Layer> layers_;
  nn::Mlp baseline_ffn_;
};

// Concatenation of the pooled vectors: width d_i + d_t.
Var fuse_concat(const encoders::FeatureBundle& image, const encoders::FeatureBundle& tabular);
Var fuse_concat(const Var& image_pooled, const Var& tabular_pooled);
// Element-wise maximum of equal-width pooled vectors.
Var fuse_max(const encoders::FeatureBundle& image, const encoders::FeatureBundle& tabular);
Var fuse_max(const Var& image_pooled, const Var& tabular_pooled);

// Mean over heads, then over image tokens, of the attention paid to each
// attribute. Throws when the trace has no attribute columns.
std::vector<double> aggregate_attention(const FusionTrace& trace);

}  // namespace rovtl::fusion
