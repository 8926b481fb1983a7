#include "rovtl/encoders.hpp"

#include <cmath>
#include <stdexcept>

namespace rovtl::encoders {

FeatureBundle FeatureBundle::detached() const {
  FeatureBundle out;
  out.tokens = tokens.detach();
  out.pooled = pooled.detach();
  out.modality = modality;
  return out;
}

int ImageEncoderConfig::token_count() const {
  int size = input_size;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) size = (size + 2 - 3) / 2 + 1;
  return size * size;
}

void ImageEncoderConfig::validate() const {
  if (channels <= 0 || input_size <= 0 || output_width <= 0) {
    throw std::invalid_argument("image encoder: widths must be positive");
  }
  if (conv_channels.empty()) throw std::invalid_argument("image encoder: need at least one conv stage");
  for (int c : conv_channels) {
    if (c <= 0) throw std::invalid_argument("image encoder: conv channels must be positive");
  }
}

void TabularEncoderConfig::validate() const {
  if (token_width <= 0 || depth < 0 || heads <= 0 || ffn_hidden <= 0 || name_buckets <= 0) {
    throw std::invalid_argument("tabular encoder: widths must be positive");
  }
  if (token_width % heads != 0) throw std::invalid_argument("tabular encoder: token width not divisible by heads");
}

void EncoderConfig::validate() const {
  image.validate();
  tabular.validate();
  if (projection_widths.empty()) throw std::invalid_argument("projection widths: empty");
  for (std::size_t i = 0; i < projection_widths.size(); ++i) {
    if (projection_widths[i] <= 0 || (i > 0 && projection_widths[i] <= projection_widths[i - 1])) {
      throw std::invalid_argument("projection widths must be positive and strictly increasing");
    }
  }
  if (projection_hidden <= 0) throw std::invalid_argument("projection hidden width must be positive");
}

ImageEncoder::ImageEncoder(const ImageEncoderConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  int in = config_.channels;
  for (int out : config_.conv_channels) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * 9));
    conv_weights_.push_back(Var::parameter(nn::uniform_matrix(rng, out, in * 9, bound)));
    conv_biases_.push_back(Var::parameter(nn::uniform_matrix(rng, out, 1, bound)));
    in = out;
  }
  token_projection_ = nn::Linear(in, config_.output_width, rng);
}

FeatureBundle ImageEncoder::encode(const vision::Image& image) const {
  if (image.channels != config_.channels || image.height != config_.input_size ||
      image.width != config_.input_size) {
    throw std::invalid_argument("encode_image: expected " + std::to_string(config_.channels) + "x" +
                                std::to_string(config_.input_size) + "x" + std::to_string(config_.input_size) +
                                " image");
  }
  for (double p : image.pixels) {
    if (!std::isfinite(p)) throw std::invalid_argument("encode_image: non-finite pixel");
  }
  Var x = Var::constant(image.as_matrix());
  int size = config_.input_size;
  for (std::size_t s = 0; s < conv_weights_.size(); ++s) {
    ag::ConvGeometry geo{size, size, 3, 2, 1};
    x = ag::relu(ag::add(ag::conv2d(x, conv_weights_[s], geo), conv_biases_[s]));
    size = geo.out_height();
  }
  FeatureBundle bundle;
  bundle.modality = Modality::image;
  bundle.tokens = token_projection_(ag::transpose(x));
  bundle.pooled = ag::mean_rows(bundle.tokens);
  return bundle;
}

std::vector<FeatureBundle> ImageEncoder::encode_batch(const std::vector<vision::Image>& images) const {
  std::vector<FeatureBundle> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(encode(img));
  return out;
}

void ImageEncoder::register_parameters(nn::ParameterList& out, const std::string& prefix) const {
  for (std::size_t s = 0; s < conv_weights_.size(); ++s) {
    out.add(prefix + ".conv" + std::to_string(s) + ".weight", conv_weights_[s]);
    out.add(prefix + ".conv" + std::to_string(s) + ".bias", conv_biases_[s]);
  }
  token_projection_.register_parameters(out, prefix + ".token_projection");
}

int name_bucket(std::string_view name, int buckets) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return static_cast<int>(h % static_cast<std::uint64_t>(buckets));
}

std::string level_key(const std::string& name, const std::string& level) { return name + '\x1f' + level; }

TabularEncoder::TabularEncoder(const TabularEncoderConfig& config, const tabular::AttributeSchema& schema, Rng& rng)
    : config_(config) {
  config_.validate();
  const int d = config_.token_width;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  cls_ = Var::parameter(nn::uniform_matrix(rng, 1, d, bound));
  name_table_ = Var::parameter(nn::uniform_matrix(rng, config_.name_buckets, d, 1.0));
  continuous_weight_ = Var::parameter(nn::uniform_matrix(rng, 1, d, 1.0));
  continuous_bias_ = Var::parameter(nn::uniform_matrix(rng, 1, d, bound));
  std::vector<std::string> keys;
  for (const auto& col : schema.columns()) {
    for (const auto& level : col.levels) keys.push_back(level_key(col.name, level));
  }
  level_keys_ = keys;
  for (std::size_t i = 0; i < level_keys_.size(); ++i) level_rows_[level_keys_[i]] = static_cast<int>(i) + 1;
  level_table_ = Var::parameter(nn::uniform_matrix(rng, static_cast<ag::Index>(level_keys_.size()) + 1, d, 1.0));
  for (int b = 0; b < config_.depth; ++b) blocks_.emplace_back(d, config_.heads, config_.ffn_hidden, rng);
  final_norm_ = nn::LayerNorm(d);
}

void TabularEncoder::set_level_keys(std::vector<std::string> keys) {
  if (static_cast<ag::Index>(keys.size()) + 1 != level_table_.rows()) {
    throw std::invalid_argument("tabular encoder: level key count does not match the level table");
  }
  level_keys_ = std::move(keys);
  level_rows_.clear();
  for (std::size_t i = 0; i < level_keys_.size(); ++i) level_rows_[level_keys_[i]] = static_cast<int>(i) + 1;
}

void TabularEncoder::fit_standardization(const std::vector<tabular::TabularSample>& train) {
  stats_.clear();
  if (train.empty()) return;
  adopt_schema(*train.front().schema(), train);
}

void TabularEncoder::adopt_schema(const tabular::AttributeSchema& schema,
                                  const std::vector<tabular::TabularSample>& train) {
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& col = schema.column(c);
    if (col.kind != tabular::ColumnKind::continuous || stats_.count(col.name)) continue;
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& s : train) {
      if (auto v = s.value(static_cast<int>(c))) {
        sum += *v;
        sq += *v * *v;
        ++n;
      }
    }
    ColumnStats st;
    if (n > 0) {
      st.mean = sum / static_cast<double>(n);
      const double var = std::max(0.0, sq / static_cast<double>(n) - st.mean * st.mean);
      st.stddev = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    stats_[col.name] = st;
  }
}

Var TabularEncoder::continuous_token(const std::string& name, double raw_value) const {
  if (name.empty()) throw std::invalid_argument("attribute_token: empty name");
  if (!std::isfinite(raw_value)) throw std::invalid_argument("attribute_token: non-finite value");
  ColumnStats st;
  if (auto it = stats_.find(name); it != stats_.end()) st = it->second;
  const double z = (raw_value - st.mean) / st.stddev;
  const Var value = ag::add(ag::scale(continuous_weight_, z), continuous_bias_);
  return ag::add(ag::gather_row(name_table_, name_bucket(name, config_.name_buckets)), value);
}

Var TabularEncoder::categorical_token(const std::string& name, const std::string& level) const {
  if (name.empty()) throw std::invalid_argument("attribute_token: empty name");
  int row = 0;
  if (auto it = level_rows_.find(level_key(name, level)); it != level_rows_.end()) row = it->second;
  return ag::add(ag::gather_row(name_table_, name_bucket(name, config_.name_buckets)),
                 ag::gather_row(level_table_, row));
}

Var TabularEncoder::attribute_token(const tabular::Column& column, double value) const {
  if (column.kind == tabular::ColumnKind::continuous) return continuous_token(column.name, value);
  const auto level = static_cast<std::size_t>(value);
  if (value < 0 || level >= column.levels.size()) throw std::invalid_argument("attribute_token: level out of range");
  return categorical_token(column.name, column.levels[level]);
}

FeatureBundle TabularEncoder::encode(const tabular::TabularSample& sample) const {
  std::vector<Var> rows;
  rows.reserve(sample.size() + 1);
  rows.push_back(cls_);
  for (const auto& e : sample.entries()) rows.push_back(attribute_token(sample.schema()->column(e.column), e.value));
  Var x = rows.size() == 1 ? cls_ : ag::concat_rows(rows);
  for (const auto& block : blocks_) x = block(x);
  FeatureBundle bundle;
  bundle.modality = Modality::tabular;
  bundle.tokens = final_norm_(x);
  bundle.pooled = ag::slice_rows(bundle.tokens, 0, 1);
  return bundle;
}

void TabularEncoder::register_parameters(nn::ParameterList& out, const std::string& prefix) const {
  out.add(prefix + ".cls", cls_);
  out.add(prefix + ".name_table", name_table_);
  out.add(prefix + ".continuous_weight", continuous_weight_);
  out.add(prefix + ".continuous_bias", continuous_bias_);
  out.add(prefix + ".level_table", level_table_);
  for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b].register_parameters(out, prefix + ".block" + std::to_string(b));
  final_norm_.register_parameters(out, prefix + ".final_norm");
}

ProjectionHead::ProjectionHead(int input_width, int hidden, std::vector<int> widths, Rng& rng)
    : input_width_(input_width), widths_(std::move(widths)) {
  if (widths_.empty()) throw std::invalid_argument("projection head: no widths");
  for (std::size_t i = 1; i < widths_.size(); ++i) {
    if (widths_[i] <= widths_[i - 1]) throw std::invalid_argument("projection head: widths must increase");
  }
  mlp_ = nn::Mlp(input_width, hidden, widths_.back(), rng);
}

ProjectionSet ProjectionHead::project(const Var& pooled_rows) const {
  if (pooled_rows.cols() != input_width_) {
    throw std::invalid_argument("project: pooled width " + std::to_string(pooled_rows.cols()) +
                                " does not match head input " + std::to_string(input_width_));
  }
  const Var full = mlp_(pooled_rows);
  ProjectionSet set;
  set.widths = widths_;
  for (int w : widths_) {
    const Var prefix = w == widths_.back() ? full : ag::slice_cols(full, 0, w);
    set.projections.push_back(ag::l2_normalize_rows(prefix, 1e-12));
  }
  return set;
}

void ProjectionHead::register_parameters(nn::ParameterList& out, const std::string& prefix) const {
  mlp_.register_parameters(out, prefix + ".mlp");
}

}  // namespace rovtl::encoders
