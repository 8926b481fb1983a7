// rovtl: command line front end for data generation, training, evaluation,
// reports and ablations.

#include "rovtl/checkpoint.hpp"
#include "rovtl/harness.hpp"
#include "rovtl/text.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rovtl;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool out_required) {
  cmd->add_option("--config", o.config, "key = value experiment configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "top-level seed; re-derives every stage seed");
  auto* out = cmd->add_option("--out", o.out, "output location");
  if (out_required) out->required();
  cmd->add_option("--data", o.data, "dataset directory written by gen-data (default: synthesize from config)");
}

harness::ExperimentConfig resolve(const CommonOptions& o) {
  harness::ExperimentConfig c = o.config.empty() ? harness::ExperimentConfig() : harness::ExperimentConfig::load(o.config);
  if (o.seed) c.reseed(*o.seed);
  if (!o.data.empty()) {
    c.data.synthetic = false;
    c.data.dir = o.data;
  }
  return c;
}

harness::Splits load_splits(const harness::ExperimentConfig& c) {
  c.validate();
  return harness::prepare_data(c);
}

// A tuned model brings its own model configuration; synthetic data is
// regenerated for the model's task.
void follow_checkpoint_task(harness::ExperimentConfig& c, const checkpoint::Checkpoint& ck) {
  config::load(ck.config, "model.", c.model);
  if (!c.data.synthetic) return;
  const bool regression = c.model.task.kind == finetune::TaskKind::regression;
  c.data.synth.task = regression ? synth::SynthTask::regression : synth::SynthTask::classification;
}

void save_resolved(const harness::ExperimentConfig& c, const fs::path& dir, const std::string& command) {
  config::KeyValues kv = c.to_kv();
  kv.set("recipe", command);
  kv.save(dir / "resolved_config.txt");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rovtl: image/tabular training under missing attributes"};
  app.require_subcommand(1);

  CommonOptions gen_opts, pre_opts, ft_opts, eval_opts, sweep_opts, ablate_opts, run_opts;

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset (schema.csv, train/, test/)");
  add_common(gen, gen_opts, true);

  auto* pre = app.add_subcommand("pretrain", "contrastive pretraining; writes a run directory with pretrain.ckpt");
  add_common(pre, pre_opts, false);

  auto* ft = app.add_subcommand("finetune", "downstream tuning; writes a run directory with finetune.ckpt");
  add_common(ft, ft_opts, false);
  std::string ft_checkpoint, ft_task;
  bool frozen = false, trainable = false, transfer = false;
  ft->add_option("--checkpoint", ft_checkpoint, "pretrained encoder checkpoint (omit for random init)")
      ->check(CLI::ExistingFile);
  ft->add_option("--task", ft_task, "classification or regression")
      ->check(CLI::IsMember({"classification", "regression"}));
  auto* frozen_flag = ft->add_flag("--frozen", frozen, "keep the encoders fixed");
  ft->add_flag("--trainable", trainable, "update the encoders (default)")->excludes(frozen_flag);
  ft->add_flag("--transfer", transfer, "load encoders pretrained on a different schema");

  auto* ev = app.add_subcommand("evaluate", "metric of a tuned model on complete test records");
  add_common(ev, eval_opts, false);
  std::string ev_checkpoint, ev_metric;
  ev->add_option("--checkpoint", ev_checkpoint, "fine-tuned checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--metric", ev_metric, "auc, accuracy or mae")->check(CLI::IsMember({"auc", "accuracy", "mae"}));

  auto* sw = app.add_subcommand("sweep", "availability sweep of a tuned model");
  add_common(sw, sweep_opts, true);
  std::string sw_checkpoint, sw_metric;
  std::vector<std::string> sw_protocols;
  sw->add_option("--checkpoint", sw_checkpoint, "fine-tuned checkpoint")->required()->check(CLI::ExistingFile);
  sw->add_option("--protocol", sw_protocols, "random, li or mi (repeatable)")
      ->check(CLI::IsMember({"random", "li", "mi"}));
  sw->add_option("--metric", sw_metric, "auc, accuracy or mae")->check(CLI::IsMember({"auc", "accuracy", "mae"}));

  auto* rep = app.add_subcommand("report", "per-protocol CSVs and plots from sweep results");
  std::string results_dir;
  bool plots = false;
  rep->add_option("--results-dir", results_dir, "directory searched for sweep.csv files")
      ->required()
      ->check(CLI::ExistingDirectory);
  rep->add_flag("--plots", plots, "also write SVG line plots");

  auto* abl = app.add_subcommand("ablate", "run several recipes and tabulate them");
  add_common(abl, ablate_opts, false);
  std::vector<std::string> recipes;
  abl->add_option("--recipes", recipes, "recipe names (default: all)")->delimiter(',');

  auto* run = app.add_subcommand("run", "one recipe end to end: pretrain, finetune, sweep");
  add_common(run, run_opts, false);
  std::string recipe = "rovtl";
  run->add_option("--recipe", recipe, "recipe name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      harness::ExperimentConfig c = resolve(gen_opts);
      if (!c.data.synthetic) throw std::runtime_error("gen-data synthesizes data; drop --data");
      const harness::Splits data = load_splits(c);
      harness::write_data(data, gen_opts.out);
      config::KeyValues kv;
      kv.set_int("data.test_samples", static_cast<long long>(c.data.test_samples));
      config::store(kv, "synth.", c.data.synth);
      kv.save(fs::path(gen_opts.out) / "data_config.txt");
      std::cout << gen_opts.out << '\n';
    } else if (*pre) {
      harness::ExperimentConfig c = resolve(pre_opts);
      if (!pre_opts.out.empty()) c.output_dir = pre_opts.out;
      const harness::Splits data = load_splits(c);
      const fs::path dir = harness::make_run_dir(c.output_dir, "pretrain");
      save_resolved(c, dir, "pretrain");
      harness::run_pretrain_stage(c, data, dir, &std::clog);
      std::cout << dir.string() << '\n';
    } else if (*ft) {
      harness::ExperimentConfig c = resolve(ft_opts);
      if (!ft_opts.out.empty()) c.output_dir = ft_opts.out;
      if (!ft_task.empty()) {
        const bool regression = ft_task == "regression";
        if (regression != (c.model.task.kind == finetune::TaskKind::regression)) {
          c.model.task = regression ? finetune::TaskSpec::regression() : finetune::TaskSpec::classification(2);
        }
        c.data.synth.task = regression ? synth::SynthTask::regression : synth::SynthTask::classification;
      }
      if (frozen) c.finetune.frozen_backbones = true;
      if (trainable) c.finetune.frozen_backbones = false;
      const harness::Splits data = load_splits(c);
      std::optional<pretrain::PretrainModel> pretrained;
      if (!ft_checkpoint.empty()) {
        pretrained = checkpoint::load_pretrain(checkpoint::read(ft_checkpoint), data.train.schema,
                                               transfer ? checkpoint::LoadMode::transfer : checkpoint::LoadMode::strict,
                                               data.train.samples);
        c.model.encoders = pretrained->config;
      }
      const fs::path dir = harness::make_run_dir(c.output_dir, "finetune");
      save_resolved(c, dir, "finetune");
      harness::run_finetune_stage(c, data, pretrained ? &*pretrained : nullptr, dir, &std::clog);
      std::cout << dir.string() << '\n';
    } else if (*ev) {
      harness::ExperimentConfig c = resolve(eval_opts);
      const checkpoint::Checkpoint ck = checkpoint::read(ev_checkpoint);
      follow_checkpoint_task(c, ck);
      const harness::Splits data = load_splits(c);
      const finetune::RovtlModel model = checkpoint::load_finetune(ck, data.train.schema);
      const eval::MetricKind kind =
          ev_metric.empty() ? c.eval.metric_for(model.config.task) : eval::parse_metric_kind(ev_metric);
      const double value = eval::evaluate_full(model, data.test, kind);
      if (!eval_opts.out.empty()) {
        std::ofstream out(eval_opts.out);
        if (!out) throw std::runtime_error("cannot write " + eval_opts.out);
        out << "metric,value\n" << eval::to_string(kind) << ',' << text::format_double(value) << '\n';
      }
      std::cout << eval::to_string(kind) << ' ' << text::format_double(value) << '\n';
    } else if (*sw) {
      harness::ExperimentConfig c = resolve(sweep_opts);
      const checkpoint::Checkpoint ck = checkpoint::read(sw_checkpoint);
      follow_checkpoint_task(c, ck);
      const harness::Splits data = load_splits(c);
      const finetune::RovtlModel model = checkpoint::load_finetune(ck, data.train.schema);
      if (!sw_metric.empty()) c.eval.metric = eval::parse_metric_kind(sw_metric);
      if (!sw_protocols.empty()) {
        c.eval.protocols.clear();
        for (const auto& p : sw_protocols) c.eval.protocols.push_back(tabular::parse_missingness_kind(p));
      }
      std::vector<eval::SweepResult> results;
      std::optional<tabular::ImportanceRanking> ranking;
      for (auto protocol : c.eval.protocols) {
        eval::SweepOptions options;
        options.protocol = protocol;
        options.metric = c.eval.metric_for(model.config.task);
        options.fractions = c.eval.fractions;
        options.seed = c.eval.seed;
        if (protocol != tabular::MissingnessKind::random) {
          if (!ranking) ranking = harness::fit_ranking(data.train, model.config.task, c.importance_trees, c.importance_seed);
          options.ranking = ranking;
        }
        results.push_back(eval::sweep(model, data.test, options));
        std::cout << tabular::to_string(protocol) << " mean " << text::format_double(results.back().mean) << '\n';
      }
      const fs::path out_path(sweep_opts.out);
      if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
      eval::write_sweep_csv(results, out_path);
    } else if (*rep) {
      std::cout << harness::write_report(results_dir, plots).string() << '\n';
    } else if (*abl) {
      harness::ExperimentConfig c = resolve(ablate_opts);
      if (!ablate_opts.out.empty()) c.output_dir = ablate_opts.out;
      std::vector<harness::Recipe> chosen;
      for (const auto& r : recipes) chosen.push_back(harness::parse_recipe(r));
      if (chosen.empty()) chosen.assign(harness::kAllRecipes.begin(), harness::kAllRecipes.end());
      std::cout << harness::run_ablation(chosen, c, &std::clog).string() << '\n';
    } else if (*run) {
      harness::ExperimentConfig c = resolve(run_opts);
      if (!run_opts.out.empty()) c.output_dir = run_opts.out;
      std::cout << harness::run_recipe(harness::parse_recipe(recipe), c, &std::clog).dir.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
