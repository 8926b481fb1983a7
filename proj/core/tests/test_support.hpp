#pragma once

// Small fixtures shared by the unit, integration and acceptance tests.

#include "rovtl/finetune.hpp"
#include "rovtl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace rovtl::testing {

// Central-difference gradient of a scalar function of one parameter,
// compared entry by entry with the analytic gradient from backward().
// Returns the largest relative error max|a - n| / max(1, |a|, |n|).
inline double gradient_error(ag::Var param, const std::function<ag::Var()>& loss, double h = 1e-6) {
  param.zero_grad();
  ag::Var out = loss();
  ag::backward(out);
  const ag::Matrix analytic = param.has_grad() ? param.grad() : ag::Matrix::Zero(param.rows(), param.cols());
  double worst = 0.0;
  for (ag::Index r = 0; r < param.rows(); ++r) {
    for (ag::Index c = 0; c < param.cols(); ++c) {
      const double saved = param.value()(r, c);
      param.mutable_value()(r, c) = saved + h;
      double up = 0.0;
      {
        ag::NoGradGuard guard;
        up = loss().item();
      }
      param.mutable_value()(r, c) = saved - h;
      double down = 0.0;
      {
        ag::NoGradGuard guard;
        down = loss().item();
      }
      param.mutable_value()(r, c) = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic(r, c);
      worst = std::max(worst, std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)}));
    }
  }
  return worst;
}

inline ag::Matrix random_matrix(Rng& rng, ag::Index rows, ag::Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  ag::Matrix m(rows, cols);
  for (ag::Index r = 0; r < rows; ++r) {
    for (ag::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  }
  return m;
}

// Columns "a", "b", "c", ... alternating continuous / categorical (levels x, y, z).
inline tabular::SchemaPtr letter_schema(int columns) {
  std::vector<tabular::Column> cols;
  for (int i = 0; i < columns; ++i) {
    tabular::Column c;
    c.name = columns <= 26 ? std::string(1, static_cast<char>('a' + i)) : "col" + std::to_string(i);
    if (i % 2 == 1) {
      c.kind = tabular::ColumnKind::categorical;
      c.levels = {"x", "y", "z"};
    }
    cols.push_back(std::move(c));
  }
  return std::make_shared<const tabular::AttributeSchema>(std::move(cols));
}

// Every column present; continuous values i + 0.5, categorical level i % 3.
inline tabular::TabularSample full_sample(const tabular::SchemaPtr& schema, double offset = 0.0) {
  std::vector<tabular::Entry> entries;
  for (std::size_t i = 0; i < schema->size(); ++i) {
    const bool categorical = schema->column(i).kind == tabular::ColumnKind::categorical;
    entries.push_back({static_cast<int>(i), categorical ? static_cast<double>(i % 3) : i + 0.5 + offset});
  }
  return tabular::TabularSample(schema, std::move(entries));
}

inline encoders::EncoderConfig tiny_encoders(int image_size = 8) {
  encoders::EncoderConfig c;
  c.image.input_size = image_size;
  c.image.conv_channels = {4, 8};
  c.image.output_width = 8;
  c.tabular.token_width = 8;
  c.tabular.heads = 2;
  c.tabular.ffn_hidden = 16;
  c.tabular.name_buckets = 64;
  c.projection_widths = {4, 8};
  c.projection_hidden = 16;
  return c;
}

inline fusion::FusionConfig tiny_fusion() {
  fusion::FusionConfig c;
  c.width = 8;
  c.self_heads = 2;
  c.cross_heads = 2;
  c.ffn_hidden = 16;
  return c;
}

inline finetune::ModelConfig tiny_model(int image_size = 8) {
  finetune::ModelConfig c;
  c.encoders = tiny_encoders(image_size);
  c.fusion = tiny_fusion();
  c.task = finetune::TaskSpec::classification(2);
  return c;
}

inline synth::SynthConfig tiny_synth(std::size_t samples = 64, std::uint64_t seed = 0) {
  synth::SynthConfig c;
  c.samples = samples;
  c.image_size = 8;
  c.seed = seed;
  return c;
}

struct PassLosses {
  ag::Var unimodal;
  ag::Var multi;
};

// Both step losses recomputed from the public model API for fixed (t+, t-).
inline PassLosses pass_losses(const finetune::RovtlModel& model, const Dataset& data,
                              const std::vector<std::size_t>& batch, const std::vector<tabular::NestedPair>& pairs) {
  ag::Matrix targets(static_cast<ag::Index>(batch.size()), data.targets.cols());
  std::vector<ag::Var> img_rows, tab_rows, plus_rows, minus_rows;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    targets.row(static_cast<ag::Index>(i)) = data.targets.row(static_cast<ag::Index>(batch[i]));
    const auto image = model.image.encode(data.images[batch[i]]);
    const auto plus = model.tabular.encode(pairs[i].plus);
    const auto minus = model.tabular.encode(pairs[i].minus);
    img_rows.push_back(model.image_head(image.pooled));
    tab_rows.push_back(model.tabular_head(plus.pooled));
    plus_rows.push_back(model.multimodal_logits(image, plus));
    minus_rows.push_back(model.multimodal_logits(image, minus));
  }
  const finetune::TaskSpec& spec = model.config.task;
  PassLosses out;
  out.unimodal = finetune::unimodal_loss(finetune::task_loss(ag::concat_rows(img_rows), targets, spec),
                                         finetune::task_loss(ag::concat_rows(tab_rows), targets, spec));
  out.multi = finetune::multimodal_loss(finetune::task_loss(ag::concat_rows(plus_rows), targets, spec),
                                        finetune::task_loss(ag::concat_rows(minus_rows), targets, spec), spec.lambda);
  return out;
}

// Central difference of `loss` with respect to one entry of `p`.
inline double numeric_gradient(ag::Var p, ag::Index r, ag::Index c, const std::function<double()>& loss,
                               double h = 1e-5) {
  const double saved = p.value()(r, c);
  p.mutable_value()(r, c) = saved + h;
  const double up = loss();
  p.mutable_value()(r, c) = saved - h;
  const double down = loss();
  p.mutable_value()(r, c) = saved;
  return (up - down) / (2 * h);
}

}  // namespace rovtl::testing
