#include "rovtl/harness.hpp"

#include "rovtl/importance.hpp"
#include "rovtl/rng.hpp"
#include "rovtl/text.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rovtl::harness {

namespace fs = std::filesystem;

namespace {

// Stage tags for seeds derived from the top-level seed.
enum SeedStage : std::uint64_t { kData = 100, kPretrain, kFinetune, kEval, kImportance };

const char* const kResolvedConfig = "resolved_config.txt";

std::string join_protocols(const std::vector<tabular::MissingnessKind>& kinds) {
  std::vector<std::string> parts;
  for (auto k : kinds) parts.emplace_back(tabular::to_string(k));
  return text::join(parts, ',');
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

std::string_view to_string(Recipe recipe) {
  switch (recipe) {
    case Recipe::rovtl:
      return "rovtl";
    case Recipe::no_pretrain:
      return "no_pretrain";
    case Recipe::no_gate:
      return "no_gate";
    case Recipe::no_downstream_missingness:
      return "no_downstream_missingness";
    case Recipe::no_tabmofe:
      return "no_tabmofe";
    case Recipe::no_dgl:
      return "no_dgl";
    case Recipe::corrupted_pretrain:
      return "corrupted_pretrain";
    case Recipe::concat_fuse:
      return "concat_fuse";
    case Recipe::max_fuse:
      return "max_fuse";
  }
  return "rovtl";
}

Recipe parse_recipe(std::string_view name) {
  for (Recipe r : kAllRecipes) {
    if (to_string(r) == name) return r;
  }
  throw std::invalid_argument("unknown recipe '" + std::string(name) + "'");
}

eval::MetricKind EvalConfig::metric_for(const finetune::TaskSpec& task) const {
  if (metric) return *metric;
  return task.kind == finetune::TaskKind::regression ? eval::MetricKind::mae : eval::MetricKind::auc;
}

ExperimentConfig::ExperimentConfig() {
  data.synth.samples = 1024;
  pretrain.epochs = 10;
  finetune.epochs = 30;
  reseed(0);
}

void ExperimentConfig::reseed(std::uint64_t new_seed) {
  seed = new_seed;
  data.synth.seed = derive_seed(seed, kData);
  pretrain.seed = derive_seed(seed, kPretrain);
  finetune.seed = derive_seed(seed, kFinetune);
  eval.seed = derive_seed(seed, kEval);
  importance_seed = derive_seed(seed, kImportance);
}

ExperimentConfig ExperimentConfig::from_kv(const config::KeyValues& kv) {
  ExperimentConfig c;
  c.reseed(kv.get_u64("seed", 0));
  c.data.synthetic = kv.get_bool("data.synthetic", c.data.synthetic);
  c.data.dir = kv.get_string("data.dir", c.data.dir.string());
  c.data.test_samples = static_cast<std::size_t>(kv.get_int("data.test_samples", static_cast<long long>(c.data.test_samples)));
  config::load(kv, "synth.", c.data.synth);
  config::load(kv, "model.", c.model);
  config::load(kv, "pretrain.", c.pretrain);
  config::load(kv, "finetune.", c.finetune);
  c.pretraining = kv.get_bool("pipeline.pretraining", c.pretraining);
  c.lr_sweep = kv.get_bool("tuning.lr_sweep", c.lr_sweep);
  c.lr_grid = kv.get_doubles("tuning.lr_grid", c.lr_grid);
  c.validation_fraction = kv.get_double("tuning.validation_fraction", c.validation_fraction);
  c.importance_trees = static_cast<int>(kv.get_int("importance.trees", c.importance_trees));
  c.importance_seed = kv.get_u64("importance.seed", c.importance_seed);
  std::vector<std::string> protocols = kv.get_strings("eval.protocols", {});
  if (!protocols.empty()) {
    c.eval.protocols.clear();
    for (const auto& p : protocols) c.eval.protocols.push_back(tabular::parse_missingness_kind(p));
  }
  c.eval.fractions = kv.get_doubles("eval.fractions", c.eval.fractions);
  const std::string metric = kv.get_string("eval.metric", "default");
  if (metric != "default") c.eval.metric = eval::parse_metric_kind(metric);
  c.eval.seed = kv.get_u64("eval.seed", c.eval.seed);
  c.output_dir = kv.get_string("output_dir", c.output_dir.string());
  kv.get_string("recipe", "");  // written into resolved configs; ignored on input
  const auto unused = kv.unused();
  if (!unused.empty()) throw std::runtime_error("unknown config key '" + unused.front() + "'");
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) { return from_kv(config::KeyValues::load(path)); }

config::KeyValues ExperimentConfig::to_kv() const {
  config::KeyValues kv;
  kv.set_u64("seed", seed);
  kv.set_bool("data.synthetic", data.synthetic);
  kv.set("data.dir", data.dir.string());
  kv.set_int("data.test_samples", static_cast<long long>(data.test_samples));
  config::store(kv, "synth.", data.synth);
  config::store(kv, "model.", model);
  config::store(kv, "pretrain.", pretrain);
  config::store(kv, "finetune.", finetune);
  kv.set_bool("pipeline.pretraining", pretraining);
  kv.set_bool("tuning.lr_sweep", lr_sweep);
  kv.set_doubles("tuning.lr_grid", lr_grid);
  kv.set_double("tuning.validation_fraction", validation_fraction);
  kv.set_int("importance.trees", importance_trees);
  kv.set_u64("importance.seed", importance_seed);
  kv.set("eval.protocols", join_protocols(eval.protocols));
  kv.set_doubles("eval.fractions", eval.fractions);
  kv.set("eval.metric", std::string(eval::to_string(eval.metric_for(model.task))));
  kv.set_u64("eval.seed", eval.seed);
  kv.set("output_dir", output_dir.string());
  return kv;
}

void ExperimentConfig::validate() const {
  if (data.synthetic) {
    data.synth.validate();
    if (data.test_samples == 0) throw std::invalid_argument("data.test_samples must be positive");
    const bool classify = data.synth.task == synth::SynthTask::classification;
    if (classify && !(model.task.kind == finetune::TaskKind::multiclass && model.task.outputs == 2)) {
      throw std::invalid_argument("synthetic classification data needs model.task.kind = multiclass with 2 outputs");
    }
    if (!classify && !(model.task.kind == finetune::TaskKind::regression && model.task.outputs == 1)) {
      throw std::invalid_argument("synthetic regression data needs model.task.kind = regression with 1 output");
    }
  } else {
    if (data.dir.empty()) throw std::invalid_argument("data.dir is required when data.synthetic = false");
    if (!fs::exists(data.dir / "schema.csv")) {
      throw std::invalid_argument("data.dir " + data.dir.string() + " has no schema.csv");
    }
  }
  model.validate();
  pretrain.validate();
  finetune.validate();
  if (lr_sweep && lr_grid.empty()) throw std::invalid_argument("tuning.lr_grid is empty");
  for (double lr : lr_grid) {
    if (!(lr > 0.0)) throw std::invalid_argument("tuning.lr_grid values must be positive");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("tuning.validation_fraction must lie in (0, 1)");
  }
  if (importance_trees < 1) throw std::invalid_argument("importance.trees must be positive");
  if (eval.protocols.empty()) throw std::invalid_argument("eval.protocols is empty");
  eval::SweepResult probe{tabular::MissingnessKind::random, eval::MetricKind::accuracy, eval.fractions,
                          std::vector<double>(eval.fractions.size(), 0.0), 0.0};
  probe.validate();
  if (output_dir.empty()) throw std::invalid_argument("output_dir is empty");
}

Splits prepare_data(const ExperimentConfig& config) {
  if (!config.data.synthetic) return read_data(config.data.dir);
  Splits out;
  synth::SynthDataset train = synth::generate(config.data.synth);
  synth::SynthConfig test_config = config.data.synth;
  test_config.samples = config.data.test_samples;
  test_config.seed = derive_seed(config.data.synth.seed, streams::kSynth, 1);
  synth::SynthDataset test = synth::generate(test_config);
  out.train = std::move(train.data);
  out.test = std::move(test.data);
  out.test.schema = out.train.schema;
  out.truth = train.truth;
  return out;
}

void write_data(const Splits& splits, const fs::path& dir) {
  fs::create_directories(dir);
  tabular::write_schema(*splits.train.schema, dir / "schema.csv");
  write_split(splits.train, dir / "train");
  write_split(splits.test, dir / "test");
  if (splits.truth) write_ranking_csv(*splits.truth, *splits.train.schema, dir / "truth_importance.csv");
}

Splits read_data(const fs::path& dir) {
  auto schema = std::make_shared<const tabular::AttributeSchema>(tabular::read_schema(dir / "schema.csv"));
  Splits out;
  out.train = read_split(dir / "train", schema);
  out.test = read_split(dir / "test", schema);
  if (fs::exists(dir / "truth_importance.csv")) {
    const CsvTable table = read_csv_table(dir / "truth_importance.csv");
    std::vector<double> scores(schema->size(), 0.0);
    const std::size_t name_col = table.column("attribute");
    const std::size_t score_col = table.column("score");
    for (const auto& row : table.rows) {
      const auto index = schema->index_of(row.at(name_col));
      if (!index) throw std::runtime_error("truth_importance.csv: unknown attribute '" + row.at(name_col) + "'");
      scores[static_cast<std::size_t>(*index)] = text::parse_double(row.at(score_col), "truth_importance.csv");
    }
    out.truth = tabular::ranking_from_scores(scores);
  }
  return out;
}

tabular::ImportanceRanking fit_ranking(const Dataset& train, const finetune::TaskSpec& task, int trees,
                                       std::uint64_t seed) {
  std::vector<double> labels(train.size());
  tabular::ImportanceTask kind = tabular::ImportanceTask::regression;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto row = static_cast<ag::Index>(i);
    labels[i] = task.kind == finetune::TaskKind::multilabel ? train.targets.row(row).sum() : train.targets(row, 0);
  }
  if (task.kind == finetune::TaskKind::multiclass) kind = tabular::ImportanceTask::classification;
  tabular::ForestOptions options;
  options.trees = trees;
  options.seed = seed;
  return tabular::rank_importance(train.samples, labels, kind, options);
}

void write_ranking_csv(const tabular::ImportanceRanking& ranking, const tabular::AttributeSchema& schema,
                       const fs::path& path) {
  auto out = open_out(path);
  out << "rank,attribute,score\n";
  for (std::size_t r = 0; r < ranking.order.size(); ++r) {
    const auto column = static_cast<std::size_t>(ranking.order[r]);
    out << r + 1 << ',' << schema.column(column).name << ',' << text::format_double(ranking.scores.at(column)) << '\n';
  }
}

fs::path make_run_dir(const fs::path& root, const std::string& name) {
  fs::create_directories(root);
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &utc);
  const std::string base = name + "-" + stamp;
  for (int n = 1;; ++n) {
    const fs::path candidate = root / (n == 1 ? base : base + "-" + std::to_string(n));
    if (fs::create_directory(candidate)) return candidate;
  }
}

void write_pretrain_metrics(const std::vector<pretrain::PretrainMetricsRow>& rows, const fs::path& path) {
  auto out = open_out(path);
  out << "epoch,step,loss\n";
  for (const auto& r : rows) out << r.epoch << ',' << r.step << ',' << text::format_double(r.loss) << '\n';
}

void write_finetune_metrics(const std::vector<finetune::EpochReport>& rows, double lambda, const fs::path& path) {
  auto out = open_out(path);
  out << "epoch,step,task_plus,task_minus,hinge,tabmofe,multi,unimodal_image,unimodal_tabular\n";
  for (const auto& r : rows) {
    const auto& l = r.losses;
    out << r.epoch << ',' << r.step << ',' << text::format_double(l.task_plus) << ','
        << text::format_double(l.task_minus) << ',' << text::format_double(l.tabmofe) << ','
        << text::format_double(lambda * l.tabmofe) << ',' << text::format_double(l.multi) << ','
        << text::format_double(l.unimodal_image) << ',' << text::format_double(l.unimodal_tabular) << '\n';
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::runtime_error("csv has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  table.header = text::split(text::trim(line), ',');
  while (std::getline(in, line)) {
    line = text::trim(line);
    if (line.empty()) continue;
    auto fields = text::split(line, ',');
    if (fields.size() != table.header.size()) {
      throw std::runtime_error(path.string() + ": row has " + std::to_string(fields.size()) + " fields, header has " +
                               std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

pretrain::PretrainModel run_pretrain_stage(const ExperimentConfig& config, const Splits& data, const fs::path& run_dir,
                                           std::ostream* log) {
  pretrain::PretrainModel model =
      pretrain::PretrainModel::create(config.model.encoders, *data.train.schema, config.pretrain.seed);
  const auto rows = pretrain::run_pretraining(data.train, config.pretrain, model, [&](const auto& row) {
    if (log) *log << "pretrain epoch " << row.epoch << " loss " << row.loss << '\n';
  });
  write_pretrain_metrics(rows, run_dir / "pretrain_metrics.csv");
  config::KeyValues extra;
  config::store(extra, "pretrain.", config.pretrain);
  checkpoint::save(checkpoint::capture(model, data.train.schema, extra), run_dir / "pretrain.ckpt");
  return model;
}

namespace {

finetune::RovtlModel fresh_model(const ExperimentConfig& config, const Dataset& train,
                                 const pretrain::PretrainModel* pretrained) {
  if (pretrained) {
    return finetune::RovtlModel::from_pretrained(*pretrained, config.model, *train.schema, config.finetune.seed);
  }
  finetune::RovtlModel model = finetune::RovtlModel::create(config.model, *train.schema, config.finetune.seed);
  model.tabular.fit_standardization(train.samples);
  return model;
}

}  // namespace

finetune::RovtlModel run_finetune_stage(const ExperimentConfig& config, const Splits& data,
                                        const pretrain::PretrainModel* pretrained, const fs::path& run_dir,
                                        std::ostream* log) {
  finetune::FinetuneConfig tuned = config.finetune;
  const eval::MetricKind metric = config.eval.metric_for(config.model.task);

  if (config.lr_sweep) {
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng = make_rng(config.finetune.seed, streams::kBatchOrder, 1);
    std::shuffle(order.begin(), order.end(), split_rng);
    const auto held_out = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(config.validation_fraction * static_cast<double>(order.size()))));
    if (held_out >= order.size()) throw std::invalid_argument("training split too small for a validation hold-out");
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held_out));
    std::vector<std::size_t> fit_idx(order.begin() + static_cast<std::ptrdiff_t>(held_out), order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(fit_idx.begin(), fit_idx.end());
    const Dataset fit = data.train.subset(fit_idx);
    const Dataset val = data.train.subset(val_idx);

    auto out = open_out(run_dir / "lr_sweep.csv");
    out << "learning_rate,validation_mean_over_sweep\n";
    std::optional<double> best_value;
    for (double lr : config.lr_grid) {
      finetune::FinetuneConfig trial = config.finetune;
      trial.optimizer.learning_rate = lr;
      finetune::RovtlModel model = fresh_model(config, fit, pretrained);
      finetune::run_finetuning(fit, trial, model);
      eval::SweepOptions options;
      options.metric = metric;
      options.fractions = config.eval.fractions;
      options.seed = config.eval.seed;
      const double value = eval::sweep(model, val, options).mean;
      out << text::format_double(lr) << ',' << text::format_double(value) << '\n';
      if (log) *log << "lr " << lr << " validation " << value << '\n';
      const bool better = !best_value || (eval::higher_is_better(metric) ? value > *best_value : value < *best_value);
      if (better) {
        best_value = value;
        tuned.optimizer.learning_rate = lr;
      }
    }
  }

  finetune::RovtlModel model = fresh_model(config, data.train, pretrained);
  const auto rows = finetune::run_finetuning(data.train, tuned, model, [&](const finetune::EpochReport& r) {
    if (log) *log << "finetune epoch " << r.epoch << " multi " << r.losses.multi << '\n';
  });
  write_finetune_metrics(rows, config.model.task.lambda, run_dir / "finetune_metrics.csv");
  config::KeyValues extra;
  config::store(extra, "finetune.", tuned);
  checkpoint::save(checkpoint::capture(model, data.train.schema, extra), run_dir / "finetune.ckpt");
  return model;
}

double low_availability_mean(const eval::SweepResult& result) {
  std::vector<double> values;
  for (double f : {0.0, 0.1, 0.2}) {
    for (std::size_t k = 0; k < result.fractions.size(); ++k) {
      if (std::abs(result.fractions[k] - f) < 1e-12) values.push_back(result.values[k]);
    }
  }
  if (values.empty()) throw std::invalid_argument("sweep has no low-availability fractions");
  return eval::mean_over_sweep(values);
}

std::vector<eval::SweepResult> run_eval_stage(const ExperimentConfig& config, const finetune::RovtlModel& model,
                                              const Splits& data, const tabular::ImportanceRanking& ranking,
                                              const fs::path& run_dir) {
  std::vector<eval::SweepResult> results;
  for (auto protocol : config.eval.protocols) {
    eval::SweepOptions options;
    options.protocol = protocol;
    options.metric = config.eval.metric_for(model.config.task);
    options.fractions = config.eval.fractions;
    options.seed = config.eval.seed;
    if (protocol != tabular::MissingnessKind::random) options.ranking = ranking;
    results.push_back(eval::sweep(model, data.test, options));
  }
  eval::write_sweep_csv(results, run_dir / "sweep.csv");

  auto summary = open_out(run_dir / "summary.csv");
  summary << "protocol,metric,mean_over_sweep,low_availability_mean\n";
  for (const auto& r : results) {
    summary << tabular::to_string(r.protocol) << ',' << eval::to_string(r.metric) << ','
            << text::format_double(r.mean) << ',' << text::format_double(low_availability_mean(r)) << '\n';
  }

  if (model.config.fusion.kind == fusion::FusionKind::gated) {
    auto gates = open_out(run_dir / "gates.csv");
    gates << "sample,gate\n";
    for (std::size_t i = 0; i < data.test.size(); ++i) {
      fusion::FusionTrace trace;
      finetune::predict(data.test.images[i], data.test.samples[i], model, &trace);
      gates << i << ',' << text::format_double(trace.gate) << '\n';
    }
    eval::write_report_csv(eval::interpretability_report(model, data.test), run_dir / "interpretability.csv");
  }
  return results;
}

ExperimentConfig apply_recipe(Recipe recipe, ExperimentConfig config) {
  switch (recipe) {
    case Recipe::rovtl:
      break;
    case Recipe::no_pretrain:
      config.pretraining = false;
      break;
    case Recipe::no_gate:
      config.model.fusion.fixed_gate = 1.0;
      break;
    case Recipe::no_downstream_missingness:
      config.finetune.downstream_missingness = false;
      break;
    case Recipe::no_tabmofe:
      config.model.task.lambda = 0.0;
      break;
    case Recipe::no_dgl:
      config.finetune.training = finetune::TrainingMode::joint;
      break;
    case Recipe::corrupted_pretrain:
      config.pretrain.mode = pretrain::AugmentationMode::corrupted;
      break;
    case Recipe::concat_fuse:
      config.model.fusion.kind = fusion::FusionKind::concat;
      break;
    case Recipe::max_fuse:
      config.model.fusion.kind = fusion::FusionKind::max;
      break;
  }
  return config;
}

RunResult run_recipe(Recipe recipe, const ExperimentConfig& base, std::ostream* log) {
  const ExperimentConfig config = apply_recipe(recipe, base);
  config.validate();
  RunResult result;
  result.recipe = recipe;
  result.dir = make_run_dir(config.output_dir, std::string(to_string(recipe)));
  if (log) *log << "run directory " << result.dir.string() << '\n';
  config::KeyValues resolved = config.to_kv();
  resolved.set("recipe", std::string(to_string(recipe)));
  resolved.save(result.dir / kResolvedConfig);

  const Splits data = prepare_data(config);
  const tabular::ImportanceRanking ranking =
      fit_ranking(data.train, config.model.task, config.importance_trees, config.importance_seed);
  write_ranking_csv(ranking, *data.train.schema, result.dir / "importance.csv");

  std::optional<pretrain::PretrainModel> pretrained;
  if (config.pretraining) pretrained = run_pretrain_stage(config, data, result.dir, log);
  const finetune::RovtlModel model =
      run_finetune_stage(config, data, pretrained ? &*pretrained : nullptr, result.dir, log);
  result.sweeps = run_eval_stage(config, model, data, ranking, result.dir);
  return result;
}

fs::path run_ablation(const std::vector<Recipe>& recipes, const ExperimentConfig& config, std::ostream* log) {
  if (recipes.empty()) throw std::invalid_argument("no recipes to run");
  const fs::path dir = make_run_dir(config.output_dir, "ablation");
  ExperimentConfig inner = config;
  inner.output_dir = dir;
  std::vector<RunResult> runs;
  for (Recipe r : recipes) {
    if (log) *log << "recipe " << to_string(r) << '\n';
    runs.push_back(run_recipe(r, inner, log));
  }
  auto out = open_out(dir / "ablation.csv");
  out << "recipe,protocol,metric,mean_over_sweep,low_availability_mean\n";
  for (const auto& run : runs) {
    for (const auto& s : run.sweeps) {
      out << to_string(run.recipe) << ',' << tabular::to_string(s.protocol) << ',' << eval::to_string(s.metric) << ','
          << text::format_double(s.mean) << ',' << text::format_double(low_availability_mean(s)) << '\n';
    }
  }
  return dir;
}

fs::path write_report(const fs::path& results_dir, bool plots) {
  if (!fs::is_directory(results_dir)) throw std::runtime_error(results_dir.string() + " is not a directory");
  const fs::path report_dir = results_dir / "report";
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(results_dir)) {
    if (!entry.is_regular_file() || entry.path().filename() != "sweep.csv") continue;
    if (entry.path().parent_path() == report_dir) continue;
    files.push_back(entry.path());
  }
  if (files.empty()) throw std::runtime_error("no sweep.csv found under " + results_dir.string());
  std::sort(files.begin(), files.end());

  // protocol -> (label, result)
  std::map<std::string, std::vector<std::pair<std::string, eval::SweepResult>>> by_protocol;
  for (const auto& file : files) {
    std::string label = file.parent_path().filename().string();
    const fs::path resolved = file.parent_path() / kResolvedConfig;
    if (fs::exists(resolved)) {
      const auto kv = config::KeyValues::load(resolved);
      if (kv.has("recipe")) label = kv.get_string("recipe", label);
    }
    for (auto& r : eval::read_sweep_csv(file)) {
      by_protocol[std::string(tabular::to_string(r.protocol))].emplace_back(label, std::move(r));
    }
  }

  fs::create_directories(report_dir);
  auto summary = open_out(report_dir / "summary.csv");
  summary << "method,protocol,metric,mean_over_sweep\n";
  for (const auto& [protocol, entries] : by_protocol) {
    auto out = open_out(report_dir / (protocol + ".csv"));
    out << "method,metric,fraction,value\n";
    std::vector<eval::SweepResult> curves;
    std::vector<std::string> labels;
    for (const auto& [label, r] : entries) {
      for (std::size_t k = 0; k < r.fractions.size(); ++k) {
        out << label << ',' << eval::to_string(r.metric) << ',' << text::format_double(r.fractions[k]) << ','
            << text::format_double(r.values[k]) << '\n';
      }
      summary << label << ',' << protocol << ',' << eval::to_string(r.metric) << ',' << text::format_double(r.mean)
              << '\n';
      curves.push_back(r);
      labels.push_back(label);
    }
    if (plots) eval::write_sweep_svg(curves, protocol + " missingness", report_dir / (protocol + ".svg"), labels);
  }
  return report_dir;
}

}  // namespace rovtl::harness
