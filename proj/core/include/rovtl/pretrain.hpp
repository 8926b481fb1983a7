#pragma once

// Symmetric image-tabular contrastive pretraining with three tabular
// augmentation regimes: attribute subsets (missing), marginal corruption,
// or none.

#include "rovtl/dataset.hpp"
#include "rovtl/encoders.hpp"
#include "rovtl/layers.hpp"

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace rovtl::pretrain {

enum class AugmentationMode { missing, corrupted, none };

std::string_view to_string(AugmentationMode mode);
AugmentationMode parse_augmentation_mode(std::string_view text);

struct PretrainConfig {
  double temperature = 0.1;
  int batch_size = 32;
  int epochs = 10;
  AugmentationMode mode = AugmentationMode::missing;
  double corruption_rate = 0.3;
  vision::AugmentParams image_augment;
  nn::AdamOptions optimizer{1e-3, 0.9, 0.999, 1e-8, 1e-4};
  std::uint64_t seed = 0;

  void validate() const;
};

// Mean of the two cross-entropies of the N x N similarity matrix (scaled by
// 1/temperature) against the diagonal, over rows and over columns.
ag::Var contrastive_loss(const ag::Var& image_rows, const ag::Var& tabular_rows, double temperature);

// Unweighted mean of contrastive_loss over every nested width.
ag::Var matryoshka_contrastive_loss(const encoders::ProjectionSet& image, const encoders::ProjectionSet& tabular,
                                    double temperature, std::vector<double>* per_width = nullptr);

struct PretrainModel {
  encoders::EncoderConfig config;
  encoders::ImageEncoder image;
  encoders::TabularEncoder tabular;
  encoders::ProjectionHead image_head;
  encoders::ProjectionHead tabular_head;

  static PretrainModel create(const encoders::EncoderConfig& config, const tabular::AttributeSchema& schema,
                              std::uint64_t seed);

  nn::ParameterList parameters() const;
};

struct PretrainStepReport {
  double loss = 0.0;
  std::vector<double> width_losses;
};

struct PretrainMetricsRow {
  int epoch = 0;
  long step = 0;
  double loss = 0.0;
};

// One optimizer step on a batch of dataset rows. Per-sample augmentation
// draws come from streams derived from one value of `rng` and the sample
// position, so they do not depend on the augmentation mode.
PretrainStepReport pretrain_step(const Dataset& data, const std::vector<std::size_t>& batch,
                                 const PretrainConfig& config, Rng& rng, PretrainModel& model, nn::Adam& optimizer,
                                 const tabular::MarginalPools* pools = nullptr);

// Full loop over `epochs`; returns one row per epoch with the mean step loss.
std::vector<PretrainMetricsRow> run_pretraining(const Dataset& train, const PretrainConfig& config,
                                                PretrainModel& model,
                                                const std::function<void(const PretrainMetricsRow&)>& on_epoch = {});

}  // namespace rovtl::pretrain
