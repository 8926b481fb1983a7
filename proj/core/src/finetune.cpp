#include "rovtl/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rovtl::finetune {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::multiclass:
      return "multiclass";
    case TaskKind::multilabel:
      return "multilabel";
    case TaskKind::regression:
      return "regression";
  }
  return "multiclass";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "multiclass" || text == "classification") return TaskKind::multiclass;
  if (text == "multilabel") return TaskKind::multilabel;
  if (text == "regression") return TaskKind::regression;
  throw std::invalid_argument("unknown task kind '" + std::string(text) + "'");
}

TaskSpec TaskSpec::classification(int classes, double lambda) {
  return {TaskKind::multiclass, classes, LossKind::cross_entropy, lambda};
}

TaskSpec TaskSpec::multilabel(int labels, double lambda) {
  return {TaskKind::multilabel, labels, LossKind::binary_cross_entropy, lambda};
}

TaskSpec TaskSpec::regression(int targets, double lambda) {
  return {TaskKind::regression, targets, LossKind::huber, lambda};
}

void TaskSpec::validate() const {
  if (outputs <= 0) throw std::invalid_argument("task: output width must be positive");
  if (!(lambda >= 0.0)) throw std::invalid_argument("task: lambda must be non-negative");
  const bool matches = (kind == TaskKind::multiclass && loss == LossKind::cross_entropy) ||
                       (kind == TaskKind::multilabel && loss == LossKind::binary_cross_entropy) ||
                       (kind == TaskKind::regression && loss == LossKind::huber);
  if (!matches) throw std::invalid_argument("task: loss does not match task kind");
  if (kind == TaskKind::multiclass && outputs < 2) throw std::invalid_argument("task: need at least two classes");
}

Var task_loss(const Var& predictions, const Matrix& targets, const TaskSpec& spec) {
  if (predictions.cols() != spec.outputs || predictions.rows() != targets.rows() ||
      targets.cols() != spec.target_width()) {
    throw std::invalid_argument("task_loss: prediction/target shapes do not match the task");
  }
  switch (spec.kind) {
    case TaskKind::multiclass: {
      std::vector<int> classes(static_cast<std::size_t>(targets.rows()));
      for (ag::Index r = 0; r < targets.rows(); ++r) {
        const double t = targets(r, 0);
        if (t != std::floor(t) || t < 0 || t >= spec.outputs) {
          throw std::invalid_argument("task_loss: class target out of range");
        }
        classes[static_cast<std::size_t>(r)] = static_cast<int>(t);
      }
      return ag::cross_entropy(predictions, classes);
    }
    case TaskKind::multilabel:
      for (ag::Index i = 0; i < targets.size(); ++i) {
        const double t = targets.data()[i];
        if (t != 0.0 && t != 1.0) throw std::invalid_argument("task_loss: multilabel targets must be 0 or 1");
      }
      return ag::bce_with_logits(predictions, targets);
    case TaskKind::regression:
      return ag::huber(predictions, targets, 1.0);
  }
  throw std::logic_error("task_loss: unreachable");
}

Var tabmofe_loss(const Var& plus, const Var& minus) {
  if (!std::isfinite(plus.item()) || !std::isfinite(minus.item())) {
    throw std::invalid_argument("tabmofe_loss: non-finite input");
  }
  return ag::relu(ag::sub(plus, minus));
}

double tabmofe_loss(double plus, double minus) {
  if (!std::isfinite(plus) || !std::isfinite(minus)) throw std::invalid_argument("tabmofe_loss: non-finite input");
  return std::max(plus - minus, 0.0);
}

Var multimodal_loss(const Var& plus, const Var& minus, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("multimodal_loss: lambda must be non-negative");
  return ag::add(ag::add(plus, minus), ag::scale(tabmofe_loss(plus, minus), lambda));
}

double multimodal_loss(double plus, double minus, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("multimodal_loss: lambda must be non-negative");
  return plus + minus + lambda * tabmofe_loss(plus, minus);
}

Var unimodal_loss(const Var& image_head_loss, const Var& tabular_head_loss) {
  return ag::add(image_head_loss, tabular_head_loss);
}

double unimodal_loss(double image_head_loss, double tabular_head_loss) { return image_head_loss + tabular_head_loss; }

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::image_encoder:
      return "image_encoder";
    case Partition::tabular_encoder:
      return "tabular_encoder";
    case Partition::image_head:
      return "image_head";
    case Partition::tabular_head:
      return "tabular_head";
    case Partition::fusion:
      return "fusion";
  }
  return "fusion";
}

void ModelConfig::validate() const {
  encoders.validate();
  fusion.validate();
  task.validate();
}

RovtlModel RovtlModel::create(const ModelConfig& config, const tabular::AttributeSchema& schema,
                              std::uint64_t seed) {
  config.validate();
  Rng rng = make_rng(seed, streams::kInit);
  RovtlModel model;
  model.config = config;
  model.image = encoders::ImageEncoder(config.encoders.image, rng);
  model.tabular = encoders::TabularEncoder(config.encoders.tabular, schema, rng);
  // Heads and fusion draw from their own stream so that they initialize the
  // same way whether or not the encoders come from a checkpoint.
  Rng head_rng = make_rng(seed, streams::kInit, 1);
  const int di = config.encoders.image.output_width;
  const int dt = config.encoders.tabular.token_width;
  model.fusion = fusion::FusionModule(di, dt, config.fusion, head_rng);
  model.image_head = nn::Linear(di, config.task.outputs, head_rng);
  model.tabular_head = nn::Linear(dt, config.task.outputs, head_rng);
  model.multimodal_head = nn::Linear(model.fusion.output_width(), config.task.outputs, head_rng);
  return model;
}

RovtlModel RovtlModel::from_pretrained(const pretrain::PretrainModel& pretrained, const ModelConfig& config,
                                       const tabular::AttributeSchema& schema, std::uint64_t seed) {
  ModelConfig merged = config;
  merged.encoders = pretrained.config;
  RovtlModel model = create(merged, schema, seed);
  const nn::ParameterList source = pretrained.parameters();
  nn::copy_values(source, model.parameters(Partition::image_encoder));
  // The pretrained level table is keyed by the pretraining schema; a
  // different schema keeps its own fresh table.
  if (pretrained.tabular.level_keys() == model.tabular.level_keys()) {
    nn::copy_values(source, model.parameters(Partition::tabular_encoder));
  } else {
    nn::ParameterList shared;
    for (const auto& p : model.parameters(Partition::tabular_encoder).items()) {
      if (p.name != "tabular_encoder.level_table") shared.add(p.name, p.var);
    }
    nn::copy_values(source, shared);
  }
  model.tabular.set_standardization(pretrained.tabular.standardization());
  return model;
}

nn::ParameterList RovtlModel::parameters(Partition partition) const {
  nn::ParameterList list;
  switch (partition) {
    case Partition::image_encoder:
      image.register_parameters(list, "image_encoder");
      break;
    case Partition::tabular_encoder:
      tabular.register_parameters(list, "tabular_encoder");
      break;
    case Partition::image_head:
      image_head.register_parameters(list, "image_head");
      break;
    case Partition::tabular_head:
      tabular_head.register_parameters(list, "tabular_head");
      break;
    case Partition::fusion:
      fusion.register_parameters(list, "fusion");
      multimodal_head.register_parameters(list, "multimodal_head");
      break;
  }
  return list;
}

nn::ParameterList RovtlModel::all_parameters() const {
  nn::ParameterList list;
  for (Partition p : kAllPartitions) list.append(parameters(p));
  return list;
}

Var RovtlModel::multimodal_logits(const encoders::FeatureBundle& image_bundle,
                                  const encoders::FeatureBundle& tabular_bundle, fusion::FusionOutput* trace) const {
  fusion::FusionOutput out = fusion.fuse(image_bundle, tabular_bundle);
  Var logits = multimodal_head(out.embedding);
  if (trace) *trace = std::move(out);
  return logits;
}

void FinetuneConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("finetune: negative epoch count");
  if (batch_size < 1) throw std::invalid_argument("finetune: batch size must be positive");
}

nn::Adam make_optimizer(const RovtlModel& model, const FinetuneConfig& config) {
  nn::ParameterList trainable;
  for (Partition p : kAllPartitions) {
    const bool encoder = p == Partition::image_encoder || p == Partition::tabular_encoder;
    if (encoder && config.frozen_backbones) continue;
    trainable.append(model.parameters(p));
  }
  return nn::Adam(trainable.vars(), config.optimizer);
}

namespace {

Matrix batch_targets(const Dataset& data, const std::vector<std::size_t>& batch) {
  Matrix t(static_cast<ag::Index>(batch.size()), data.targets.cols());
  for (std::size_t i = 0; i < batch.size(); ++i) t.row(static_cast<ag::Index>(i)) = data.targets.row(static_cast<ag::Index>(batch[i]));
  return t;
}

void require_finite(const Var& loss, const char* what) {
  if (!std::isfinite(loss.item())) throw std::runtime_error(std::string("dgl_step: non-finite ") + what + " loss");
}

}  // namespace

LossReport dgl_step(const Dataset& data, const std::vector<std::size_t>& batch, RovtlModel& model,
                    nn::Adam& optimizer, const FinetuneConfig& config, Rng& rng, const StepHooks& hooks) {
  if (batch.empty()) throw std::invalid_argument("dgl_step: empty batch");
  const TaskSpec& spec = model.config.task;
  const Matrix targets = batch_targets(data, batch);
  const std::uint64_t step_seed = rng();
  nn::ParameterList fusion_params = model.parameters(Partition::fusion);
  model.all_parameters().zero_grad();

  std::vector<tabular::NestedPair> pairs;
  pairs.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const tabular::TabularSample& full = data.samples.at(batch[i]);
    if (hooks.pair_override) {
      pairs.push_back(hooks.pair_override(i, full));
    } else if (config.downstream_missingness) {
      Rng pair_rng = make_rng(step_seed, streams::kNestedPair, i);
      pairs.push_back(tabular::sample_nested_pair(full, pair_rng));
    } else {
      pairs.push_back({full, full});
    }
  }

  LossReport report;
  const bool detach_encoders = config.frozen_backbones || config.training == TrainingMode::dgl;

  std::vector<encoders::FeatureBundle> image_bundles;
  std::vector<encoders::FeatureBundle> plus_bundles;
  image_bundles.reserve(batch.size());
  plus_bundles.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    image_bundles.push_back(model.image.encode(data.images.at(batch[i])));
    plus_bundles.push_back(model.tabular.encode(pairs[i].plus));
  }

  // Pass 1: unimodal heads on (image, t+).
  {
    std::vector<Var> image_rows;
    std::vector<Var> tabular_rows;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const bool cut = config.frozen_backbones || config.training == TrainingMode::joint;
      image_rows.push_back(model.image_head(cut ? image_bundles[i].pooled.detach() : image_bundles[i].pooled));
      tabular_rows.push_back(model.tabular_head(cut ? plus_bundles[i].pooled.detach() : plus_bundles[i].pooled));
    }
    const Var image_loss = task_loss(ag::concat_rows(image_rows), targets, spec);
    const Var tabular_loss = task_loss(ag::concat_rows(tabular_rows), targets, spec);
    const Var uni = unimodal_loss(image_loss, tabular_loss);
    require_finite(uni, "unimodal");
    report.unimodal_image = image_loss.item();
    report.unimodal_tabular = tabular_loss.item();
    ag::backward(uni);
    fusion_params.zero_grad();
    if (hooks.observe) hooks.observe(DglPhase::after_unimodal_pass);
  }

  // Pass 2: multimodal loss over (image, t+) and (image, t-).
  {
    std::vector<Var> plus_rows;
    std::vector<Var> minus_rows;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const encoders::FeatureBundle image_features =
          detach_encoders ? image_bundles[i].detached() : image_bundles[i];
      const encoders::FeatureBundle plus_features = detach_encoders ? plus_bundles[i].detached() : plus_bundles[i];
      encoders::FeatureBundle minus_features;
      if (detach_encoders) {
        ag::NoGradGuard no_grad;
        minus_features = model.tabular.encode(pairs[i].minus).detached();
      } else {
        minus_features = model.tabular.encode(pairs[i].minus);
      }
      plus_rows.push_back(model.multimodal_logits(image_features, plus_features));
      minus_rows.push_back(model.multimodal_logits(image_features, minus_features));
    }
    const Var plus = task_loss(ag::concat_rows(plus_rows), targets, spec);
    const Var minus = task_loss(ag::concat_rows(minus_rows), targets, spec);
    const Var hinge = tabmofe_loss(plus, minus);
    const Var multi = multimodal_loss(plus, minus, spec.lambda);
    require_finite(multi, "multimodal");
    report.task_plus = plus.item();
    report.task_minus = minus.item();
    report.tabmofe = hinge.item();
    report.multi = multi.item();
    ag::backward(multi);
    if (hooks.observe) hooks.observe(DglPhase::after_multimodal_pass);
  }

  optimizer.step();
  return report;
}

std::vector<EpochReport> run_finetuning(const Dataset& train, const FinetuneConfig& config, RovtlModel& model,
                                        const std::function<void(const EpochReport&)>& on_epoch) {
  config.validate();
  train.validate();
  if (train.size() == 0) throw std::invalid_argument("finetuning needs at least one sample");
  nn::Adam optimizer = make_optimizer(model, config);
  Rng order_rng = make_rng(config.seed, streams::kBatchOrder);
  Rng step_rng = make_rng(config.seed, streams::kNestedPair);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  std::vector<EpochReport> reports;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    LossReport sum;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      const LossReport r = dgl_step(train, batch, model, optimizer, config, step_rng);
      sum.task_plus += r.task_plus;
      sum.task_minus += r.task_minus;
      sum.tabmofe += r.tabmofe;
      sum.multi += r.multi;
      sum.unimodal_image += r.unimodal_image;
      sum.unimodal_tabular += r.unimodal_tabular;
      ++steps;
      ++step;
    }
    const double n = std::max(steps, 1);
    EpochReport er{epoch, step,
                   {sum.task_plus / n, sum.task_minus / n, sum.tabmofe / n, sum.multi / n, sum.unimodal_image / n,
                    sum.unimodal_tabular / n}};
    reports.push_back(er);
    if (on_epoch) on_epoch(er);
  }
  return reports;
}

Matrix predict(const vision::Image& image, const tabular::TabularSample& sample, const RovtlModel& model,
               fusion::FusionTrace* trace) {
  ag::NoGradGuard no_grad;
  fusion::FusionOutput out;
  const Var logits = model.multimodal_logits(model.image.encode(image), model.tabular.encode(sample), &out);
  if (trace) *trace = std::move(out.trace);
  return logits.value();
}

Matrix to_scores(const Matrix& raw, const TaskSpec& spec) {
  switch (spec.kind) {
    case TaskKind::multiclass: {
      Matrix p = raw;
      for (ag::Index r = 0; r < p.rows(); ++r) {
        const double m = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - m).exp().matrix();
        p.row(r) /= p.row(r).sum();
      }
      return p;
    }
    case TaskKind::multilabel:
      return raw.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    case TaskKind::regression:
      return raw;
  }
  return raw;
}

}  // namespace rovtl::finetune
