#pragma once

// Experiment orchestration: configuration, data preparation, the
// pretrain -> finetune -> sweep pipeline, named recipes and ablations.
//
// Every CSV written here is free of wall-clock data, so two runs with the
// same configuration produce byte-identical metrics. Only run directory
// names carry a timestamp.

#include "rovtl/checkpoint.hpp"
#include "rovtl/config.hpp"
#include "rovtl/evaluation.hpp"
#include "rovtl/synth.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rovtl::harness {

enum class Recipe {
  rovtl,
  no_pretrain,
  no_gate,
  no_downstream_missingness,
  no_tabmofe,
  no_dgl,
  corrupted_pretrain,
  concat_fuse,
  max_fuse,
};

inline constexpr std::array<Recipe, 9> kAllRecipes{
    Recipe::rovtl,      Recipe::no_pretrain,        Recipe::no_gate,     Recipe::no_downstream_missingness,
    Recipe::no_tabmofe, Recipe::no_dgl,             Recipe::corrupted_pretrain, Recipe::concat_fuse,
    Recipe::max_fuse};

std::string_view to_string(Recipe recipe);
Recipe parse_recipe(std::string_view name);

struct DataConfig {
  // Generate from `synth` when true; otherwise read `dir` (schema.csv,
  // train/, test/ as written by write_data).
  bool synthetic = true;
  synth::SynthConfig synth;
  std::size_t test_samples = 512;
  std::filesystem::path dir;
};

struct EvalConfig {
  std::vector<tabular::MissingnessKind> protocols{tabular::MissingnessKind::random, tabular::MissingnessKind::least_important,
                                                  tabular::MissingnessKind::most_important};
  std::vector<double> fractions = eval::default_fractions();
  // Defaults to auc for classification and mae for regression.
  std::optional<eval::MetricKind> metric;
  std::uint64_t seed = 0;

  eval::MetricKind metric_for(const finetune::TaskSpec& task) const;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  finetune::ModelConfig model;
  pretrain::PretrainConfig pretrain;
  finetune::FinetuneConfig finetune;
  bool pretraining = true;
  bool lr_sweep = true;
  std::vector<double> lr_grid{1e-3, 3e-3, 1e-4, 3e-4};
  double validation_fraction = 0.2;
  int importance_trees = 100;
  std::uint64_t importance_seed = 0;
  EvalConfig eval;
  std::filesystem::path output_dir = "runs";

  ExperimentConfig();

  // Seeds of the stages default to values derived from `seed`. Unknown keys
  // are rejected.
  static ExperimentConfig from_kv(const config::KeyValues& kv);
  static ExperimentConfig load(const std::filesystem::path& path);
  // Overrides the top-level seed and re-derives every stage seed.
  void reseed(std::uint64_t new_seed);
  config::KeyValues to_kv() const;
  void validate() const;
};

struct Splits {
  Dataset train;
  Dataset test;
  // Known for synthetic data.
  std::optional<tabular::ImportanceRanking> truth;
};

Splits prepare_data(const ExperimentConfig& config);
// dir/schema.csv, dir/train/, dir/test/ and, when known, dir/truth_importance.csv.
void write_data(const Splits& splits, const std::filesystem::path& dir);
Splits read_data(const std::filesystem::path& dir);

tabular::ImportanceRanking fit_ranking(const Dataset& train, const finetune::TaskSpec& task, int trees,
                                       std::uint64_t seed);
void write_ranking_csv(const tabular::ImportanceRanking& ranking, const tabular::AttributeSchema& schema,
                       const std::filesystem::path& path);

// Creates root/<name>-<UTC timestamp>, adding a numeric suffix instead of
// ever reusing an existing directory.
std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& name);

// header: epoch,step,loss
void write_pretrain_metrics(const std::vector<pretrain::PretrainMetricsRow>& rows, const std::filesystem::path& path);
// header: epoch,step,task_plus,task_minus,hinge,tabmofe,multi,unimodal_image,unimodal_tabular
// `hinge` is max(L+ - L-, 0); `tabmofe` is its weighted contribution to `multi`.
void write_finetune_metrics(const std::vector<finetune::EpochReport>& rows, double lambda,
                            const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};
CsvTable read_csv_table(const std::filesystem::path& path);

pretrain::PretrainModel run_pretrain_stage(const ExperimentConfig& config, const Splits& data,
                                           const std::filesystem::path& run_dir, std::ostream* log = nullptr);

// Tunes the learning rate on a held-out part of the training split when
// enabled, then trains on the full training split.
finetune::RovtlModel run_finetune_stage(const ExperimentConfig& config, const Splits& data,
                                        const pretrain::PretrainModel* pretrained,
                                        const std::filesystem::path& run_dir, std::ostream* log = nullptr);

std::vector<eval::SweepResult> run_eval_stage(const ExperimentConfig& config, const finetune::RovtlModel& model,
                                              const Splits& data, const tabular::ImportanceRanking& ranking,
                                              const std::filesystem::path& run_dir);

// Mean of the sweep values at availability 0, 0.1 and 0.2 (those present).
double low_availability_mean(const eval::SweepResult& result);

ExperimentConfig apply_recipe(Recipe recipe, ExperimentConfig config);

struct RunResult {
  Recipe recipe = Recipe::rovtl;
  std::filesystem::path dir;
  std::vector<eval::SweepResult> sweeps;
};

RunResult run_recipe(Recipe recipe, const ExperimentConfig& config, std::ostream* log = nullptr);

// Runs each recipe into its own directory under one ablation directory and
// writes ablation.csv there.
std::filesystem::path run_ablation(const std::vector<Recipe>& recipes, const ExperimentConfig& config,
                                   std::ostream* log = nullptr);

// Collects sweep.csv files below `results_dir` and writes one CSV per
// protocol (and an SVG line plot per protocol when `plots`) into
// results_dir/report.
std::filesystem::path write_report(const std::filesystem::path& results_dir, bool plots);

}  // namespace rovtl::harness
