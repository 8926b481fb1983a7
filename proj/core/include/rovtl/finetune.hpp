#pragma once

// Downstream tuning: task heads and losses, the more-vs-fewer hinge
// (TabMoFe), and the two-pass disentangled-gradient step.
//
// Pass 1 trains the encoders and the per-modality heads on the unimodal
// loss; anything that lands on the fusion partition is discarded. Pass 2
// runs on detached encoder features, so the multimodal loss only reaches
// the fusion partition. One optimizer update applies both.

#include "rovtl/dataset.hpp"
#include "rovtl/encoders.hpp"
#include "rovtl/fusion.hpp"
#include "rovtl/layers.hpp"
#include "rovtl/pretrain.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace rovtl::finetune {

using ag::Matrix;
using ag::Var;

enum class TaskKind { multiclass, multilabel, regression };
enum class LossKind { cross_entropy, binary_cross_entropy, huber };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view text);

struct TaskSpec {
  TaskKind kind = TaskKind::multiclass;
  int outputs = 2;  // classes, labels, or regression targets
  LossKind loss = LossKind::cross_entropy;
  double lambda = 1.0;

  static TaskSpec classification(int classes, double lambda = 1.0);
  static TaskSpec multilabel(int labels, double lambda = 1.0);
  static TaskSpec regression(int targets = 1, double lambda = 0.05);

  // Width of the target matrix: 1 for multiclass, `outputs` otherwise.
  int target_width() const { return kind == TaskKind::multiclass ? 1 : outputs; }
  void validate() const;
};

struct LossReport {
  double task_plus = 0.0;
  double task_minus = 0.0;
  double tabmofe = 0.0;
  double multi = 0.0;
  double unimodal_image = 0.0;
  double unimodal_tabular = 0.0;

  double unimodal() const { return unimodal_image + unimodal_tabular; }
};

Var task_loss(const Var& predictions, const Matrix& targets, const TaskSpec& spec);

// max(plus - minus, 0); the subgradient at plus == minus is 0.
Var tabmofe_loss(const Var& plus, const Var& minus);
double tabmofe_loss(double plus, double minus);
// plus + minus + lambda * tabmofe(plus, minus)
Var multimodal_loss(const Var& plus, const Var& minus, double lambda);
double multimodal_loss(double plus, double minus, double lambda);
Var unimodal_loss(const Var& image_head_loss, const Var& tabular_head_loss);
double unimodal_loss(double image_head_loss, double tabular_head_loss);

enum class Partition { image_encoder, tabular_encoder, image_head, tabular_head, fusion };
inline constexpr std::array<Partition, 5> kAllPartitions{Partition::image_encoder, Partition::tabular_encoder,
                                                         Partition::image_head, Partition::tabular_head,
                                                         Partition::fusion};
std::string_view to_string(Partition p);

struct ModelConfig {
  encoders::EncoderConfig encoders;
  fusion::FusionConfig fusion;
  TaskSpec task;

  void validate() const;
};

class RovtlModel {
 public:
  static RovtlModel create(const ModelConfig& config, const tabular::AttributeSchema& schema, std::uint64_t seed);
  // Copies encoder weights and standardization from a pretrained model;
  // fusion and heads are freshly initialized from `seed`.
  static RovtlModel from_pretrained(const pretrain::PretrainModel& pretrained, const ModelConfig& config,
                                    const tabular::AttributeSchema& schema, std::uint64_t seed);

  nn::ParameterList parameters(Partition partition) const;
  nn::ParameterList all_parameters() const;

  Var multimodal_logits(const encoders::FeatureBundle& image, const encoders::FeatureBundle& tabular,
                        fusion::FusionOutput* trace = nullptr) const;

  ModelConfig config;
  encoders::ImageEncoder image;
  encoders::TabularEncoder tabular;
  fusion::FusionModule fusion;
  nn::Linear image_head;
  nn::Linear tabular_head;
  nn::Linear multimodal_head;
};

enum class TrainingMode { dgl, joint };

struct FinetuneConfig {
  int epochs = 30;
  int batch_size = 32;
  nn::AdamOptions optimizer{1e-3, 0.9, 0.999, 1e-8, 1e-4};
  bool frozen_backbones = false;
  // Draw (t+, t-) nested subsets each step; off feeds t_full as both.
  bool downstream_missingness = true;
  TrainingMode training = TrainingMode::dgl;
  std::uint64_t seed = 0;

  void validate() const;
};

// Builds the optimizer over the partitions that train under `config`.
nn::Adam make_optimizer(const RovtlModel& model, const FinetuneConfig& config);

enum class DglPhase { after_unimodal_pass, after_multimodal_pass };

struct StepHooks {
  // Called after the fusion gradients are removed in pass 1 and after the
  // pass-2 backward, before the optimizer update.
  std::function<void(DglPhase)> observe;
  // Replaces the sampled (t+, t-) for sample `i` of the batch when set.
  std::function<tabular::NestedPair(std::size_t i, const tabular::TabularSample& full)> pair_override;
};

LossReport dgl_step(const Dataset& data, const std::vector<std::size_t>& batch, RovtlModel& model,
                    nn::Adam& optimizer, const FinetuneConfig& config, Rng& rng, const StepHooks& hooks = {});

struct EpochReport {
  int epoch = 0;
  long step = 0;
  LossReport losses;  // mean over the epoch's steps
};

std::vector<EpochReport> run_finetuning(const Dataset& train, const FinetuneConfig& config, RovtlModel& model,
                                        const std::function<void(const EpochReport&)>& on_epoch = {});

// Raw head outputs (1 x outputs) for one pair; zero attributes take the
// image-only path of the fusion.
Matrix predict(const vision::Image& image, const tabular::TabularSample& sample, const RovtlModel& model,
               fusion::FusionTrace* trace = nullptr);
// Probabilities for classification (softmax / sigmoid), raw for regression.
Matrix to_scores(const Matrix& raw, const TaskSpec& spec);

}  // namespace rovtl::finetune
