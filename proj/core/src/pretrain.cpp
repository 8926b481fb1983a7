#include "rovtl/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rovtl::pretrain {

std::string_view to_string(AugmentationMode mode) {
  switch (mode) {
    case AugmentationMode::missing:
      return "missing";
    case AugmentationMode::corrupted:
      return "corrupted";
    case AugmentationMode::none:
      return "none";
  }
  return "none";
}

AugmentationMode parse_augmentation_mode(std::string_view text) {
  if (text == "missing") return AugmentationMode::missing;
  if (text == "corrupted") return AugmentationMode::corrupted;
  if (text == "none") return AugmentationMode::none;
  throw std::invalid_argument("unknown augmentation mode '" + std::string(text) + "'");
}

void PretrainConfig::validate() const {
  if (!(temperature > 0.0)) throw std::invalid_argument("pretrain: temperature must be positive");
  if (batch_size < 2) throw std::invalid_argument("pretrain: batch size must be at least 2");
  if (epochs < 0) throw std::invalid_argument("pretrain: negative epoch count");
  if (!(corruption_rate >= 0.0 && corruption_rate <= 1.0)) {
    throw std::invalid_argument("pretrain: corruption rate outside [0, 1]");
  }
}

ag::Var contrastive_loss(const ag::Var& image_rows, const ag::Var& tabular_rows, double temperature) {
  if (image_rows.rows() != tabular_rows.rows()) throw std::invalid_argument("contrastive_loss: batch sizes differ");
  if (image_rows.cols() != tabular_rows.cols()) throw std::invalid_argument("contrastive_loss: widths differ");
  if (image_rows.rows() < 2) throw std::invalid_argument("contrastive_loss: need at least two pairs");
  if (!(temperature > 0.0)) throw std::invalid_argument("contrastive_loss: temperature must be positive");
  const auto n = static_cast<int>(image_rows.rows());
  std::vector<int> diagonal(n);
  std::iota(diagonal.begin(), diagonal.end(), 0);
  const ag::Var logits = ag::scale(ag::matmul(image_rows, ag::transpose(tabular_rows)), 1.0 / temperature);
  const ag::Var rows = ag::cross_entropy(logits, diagonal);
  const ag::Var cols = ag::cross_entropy(ag::transpose(logits), diagonal);
  return ag::scale(ag::add(rows, cols), 0.5);
}

ag::Var matryoshka_contrastive_loss(const encoders::ProjectionSet& image, const encoders::ProjectionSet& tabular,
                                    double temperature, std::vector<double>* per_width) {
  if (image.widths != tabular.widths || image.projections.size() != tabular.projections.size()) {
    throw std::invalid_argument("matryoshka_contrastive_loss: width lists differ");
  }
  if (image.projections.empty()) throw std::invalid_argument("matryoshka_contrastive_loss: no widths");
  if (per_width) per_width->clear();
  ag::Var total;
  for (std::size_t k = 0; k < image.projections.size(); ++k) {
    ag::Var loss = contrastive_loss(image.projections[k], tabular.projections[k], temperature);
    if (per_width) per_width->push_back(loss.item());
    total = total.defined() ? ag::add(total, loss) : loss;
  }
  return ag::scale(total, 1.0 / static_cast<double>(image.projections.size()));
}

PretrainModel PretrainModel::create(const encoders::EncoderConfig& config, const tabular::AttributeSchema& schema,
                                    std::uint64_t seed) {
  config.validate();
  Rng rng = make_rng(seed, streams::kInit);
  PretrainModel model;
  model.config = config;
  model.image = encoders::ImageEncoder(config.image, rng);
  model.tabular = encoders::TabularEncoder(config.tabular, schema, rng);
  model.image_head =
      encoders::ProjectionHead(config.image.output_width, config.projection_hidden, config.projection_widths, rng);
  model.tabular_head =
      encoders::ProjectionHead(config.tabular.token_width, config.projection_hidden, config.projection_widths, rng);
  return model;
}

nn::ParameterList PretrainModel::parameters() const {
  nn::ParameterList list;
  image.register_parameters(list, "image_encoder");
  tabular.register_parameters(list, "tabular_encoder");
  image_head.register_parameters(list, "image_projection");
  tabular_head.register_parameters(list, "tabular_projection");
  return list;
}

PretrainStepReport pretrain_step(const Dataset& data, const std::vector<std::size_t>& batch,
                                 const PretrainConfig& config, Rng& rng, PretrainModel& model, nn::Adam& optimizer,
                                 const tabular::MarginalPools* pools) {
  if (batch.size() < 2) throw std::invalid_argument("pretrain_step: batch needs at least two pairs");
  if (config.mode == AugmentationMode::corrupted && !pools) {
    throw std::invalid_argument("pretrain_step: corrupted mode needs marginal pools");
  }
  const std::uint64_t step_seed = rng();
  std::vector<ag::Var> image_rows;
  std::vector<ag::Var> tabular_rows;
  image_rows.reserve(batch.size());
  tabular_rows.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t idx = batch[i];
    Rng image_rng = make_rng(step_seed, streams::kImageAugment, i);
    Rng tab_rng = make_rng(step_seed, streams::kTabularAugment, i);
    const vision::Image augmented = vision::augment_image(data.images.at(idx), config.image_augment, image_rng);
    const tabular::TabularSample& full = data.samples.at(idx);
    tabular::TabularSample view = full;
    switch (config.mode) {
      case AugmentationMode::missing:
        view = tabular::sample_subset(full, tab_rng);
        break;
      case AugmentationMode::corrupted:
        view = tabular::marginal_corrupt(full, *pools, config.corruption_rate, tab_rng);
        break;
      case AugmentationMode::none:
        break;
    }
    image_rows.push_back(model.image.encode(augmented).pooled);
    tabular_rows.push_back(model.tabular.encode(view).pooled);
  }
  const encoders::ProjectionSet zi = model.image_head.project(ag::concat_rows(image_rows));
  const encoders::ProjectionSet zt = model.tabular_head.project(ag::concat_rows(tabular_rows));
  PretrainStepReport report;
  const ag::Var loss = matryoshka_contrastive_loss(zi, zt, config.temperature, &report.width_losses);
  report.loss = loss.item();
  if (!std::isfinite(report.loss)) throw std::runtime_error("pretrain_step: non-finite loss");
  optimizer.zero_grad();
  ag::backward(loss);
  optimizer.step();
  return report;
}

std::vector<PretrainMetricsRow> run_pretraining(const Dataset& train, const PretrainConfig& config,
                                                PretrainModel& model,
                                                const std::function<void(const PretrainMetricsRow&)>& on_epoch) {
  config.validate();
  train.validate();
  if (train.size() < 2) throw std::invalid_argument("pretraining needs at least two samples");
  model.tabular.fit_standardization(train.samples);
  tabular::MarginalPools pools;
  if (config.mode == AugmentationMode::corrupted) pools = tabular::build_marginals(train.samples, train.schema->size());

  nn::Adam optimizer(model.parameters().vars(), config.optimizer);
  Rng order_rng = make_rng(config.seed, streams::kBatchOrder);
  Rng step_rng = make_rng(config.seed, streams::kTabularAugment);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<PretrainMetricsRow> rows;
  long step = 0;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double total = 0.0;
    int steps = 0;
    // Trailing partial batches smaller than 2 pairs are dropped.
    for (std::size_t start = 0; start + 2 <= order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      total += pretrain_step(train, batch, config, step_rng, model, optimizer, &pools).loss;
      ++steps;
      ++step;
    }
    PretrainMetricsRow row{epoch, step, steps ? total / steps : 0.0};
    rows.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return rows;
}

}  // namespace rovtl::pretrain
