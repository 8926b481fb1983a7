#pragma once

// Modality encoders. The image side is a small strided convnet whose final
// feature-map cells become tokens. The tabular side embeds each present
// attribute as name-embedding + value-embedding and runs a transformer over
// [CLS] plus those tokens with no positional encoding, so the [CLS] output
// does not depend on attribute order and any number of attributes (zero
// included) is accepted.

#include "rovtl/image.hpp"
#include "rovtl/layers.hpp"
#include "rovtl/tabular.hpp"

#include <map>
#include <string>
#include <vector>

namespace rovtl::encoders {

using ag::Matrix;
using ag::Var;

enum class Modality { image, tabular };

struct FeatureBundle {
  Var tokens;  // L x d; for tabular bundles row 0 is [CLS]
  Var pooled;  // 1 x d
  Modality modality = Modality::image;

  int length() const { return static_cast<int>(tokens.rows()); }
  int width() const { return static_cast<int>(tokens.cols()); }
  FeatureBundle detached() const;
};

struct ImageEncoderConfig {
  int channels = 1;
  int input_size = 16;
  std::vector<int> conv_channels{8, 16};  // each stage: 3x3, stride 2, pad 1, ReLU
  int output_width = 16;

  int token_count() const;
  void validate() const;
};

struct TabularEncoderConfig {
  int token_width = 16;  // also the output width
  int depth = 1;
  int heads = 2;
  int ffn_hidden = 32;
  int name_buckets = 4096;

  void validate() const;
};

struct EncoderConfig {
  ImageEncoderConfig image;
  TabularEncoderConfig tabular;
  std::vector<int> projection_widths{8, 16, 32};  // strictly increasing
  int projection_hidden = 32;

  void validate() const;
};

class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(const ImageEncoderConfig& config, Rng& rng);

  FeatureBundle encode(const vision::Image& image) const;
  std::vector<FeatureBundle> encode_batch(const std::vector<vision::Image>& images) const;

  const ImageEncoderConfig& config() const { return config_; }
  int output_width() const { return config_.output_width; }
  void register_parameters(nn::ParameterList& out, const std::string& prefix) const;
  nn::Linear& token_projection() { return token_projection_; }

 private:
  ImageEncoderConfig config_;
  std::vector<Var> conv_weights_;  // C_out x C_in*9
  std::vector<Var> conv_biases_;   // C_out x 1
  nn::Linear token_projection_;
};

struct ColumnStats {
  double mean = 0.0;
  double stddev = 1.0;
};

// Stable FNV-1a hash of a column name into the embedding buckets.
int name_bucket(std::string_view name, int buckets);

class TabularEncoder {
 public:
  TabularEncoder() = default;
  TabularEncoder(const TabularEncoderConfig& config, const tabular::AttributeSchema& schema, Rng& rng);

  // Frozen standardization statistics for continuous columns, keyed by name.
  void fit_standardization(const std::vector<tabular::TabularSample>& train);
  // Adds statistics for continuous columns of a new schema that are not
  // already known; existing statistics are left untouched.
  void adopt_schema(const tabular::AttributeSchema& schema, const std::vector<tabular::TabularSample>& train);
  const std::map<std::string, ColumnStats>& standardization() const { return stats_; }
  void set_standardization(std::map<std::string, ColumnStats> stats) { stats_ = std::move(stats); }

  Var continuous_token(const std::string& name, double raw_value) const;
  // Unknown (name, level) pairs map to the reserved unknown-level row.
  Var categorical_token(const std::string& name, const std::string& level) const;
  Var attribute_token(const tabular::Column& column, double value) const;

  FeatureBundle encode(const tabular::TabularSample& sample) const;

  const TabularEncoderConfig& config() const { return config_; }
  int output_width() const { return config_.token_width; }
  const std::vector<std::string>& level_keys() const { return level_keys_; }
  void set_level_keys(std::vector<std::string> keys);
  void register_parameters(nn::ParameterList& out, const std::string& prefix) const;

  const Var& name_table() const { return name_table_; }
  const Var& continuous_bias() const { return continuous_bias_; }
  const Var& cls() const { return cls_; }

 private:
  TabularEncoderConfig config_;
  Var cls_;               // 1 x d
  Var name_table_;        // buckets x d
  Var continuous_weight_; // 1 x d
  Var continuous_bias_;   // 1 x d
  Var level_table_;       // (1 + known levels) x d, row 0 = unknown
  std::vector<std::string> level_keys_;  // row i+1 <-> key i
  std::map<std::string, int> level_rows_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm final_norm_;
  std::map<std::string, ColumnStats> stats_;
};

struct ProjectionSet {
  std::vector<int> widths;
  std::vector<Var> projections;  // one B x width matrix per width, rows unit-norm
};

// Matryoshka head: a shared MLP to the largest width; smaller widths are
// prefixes of that output, each L2-normalized on its own.
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(int input_width, int hidden, std::vector<int> widths, Rng& rng);

  ProjectionSet project(const Var& pooled_rows) const;
  ProjectionSet project(const FeatureBundle& bundle) const { return project(bundle.pooled); }

  int input_width() const { return input_width_; }
  const std::vector<int>& widths() const { return widths_; }
  void register_parameters(nn::ParameterList& out, const std::string& prefix) const;
  nn::Mlp& mlp() { return mlp_; }

 private:
  int input_width_ = 0;
  std::vector<int> widths_;
  nn::Mlp mlp_;
};

std::string level_key(const std::string& name, const std::string& level);

}  // namespace rovtl::encoders
