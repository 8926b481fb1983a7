#include "rovtl/evaluation.hpp"
#include "rovtl/finetune.hpp"
#include "rovtl/pretrain.hpp"
#include "rovtl/synth.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

using namespace rovtl;

namespace {

synth::SynthConfig bench_synth(std::size_t samples, int noise = 2) {
  synth::SynthConfig c;
  c.samples = samples;
  c.noise = noise;
  c.seed = 1;
  return c;
}

void BM_ImageEncode(benchmark::State& state) {
  const synth::SynthDataset g = synth::generate(bench_synth(1));
  const finetune::RovtlModel model = finetune::RovtlModel::create({}, *g.data.schema, 1);
  ag::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.image.encode(g.data.images[0]).pooled.value());
}
BENCHMARK(BM_ImageEncode);

void BM_TabularEncode(benchmark::State& state) {
  const synth::SynthDataset g = synth::generate(bench_synth(1, static_cast<int>(state.range(0))));
  const finetune::RovtlModel model = finetune::RovtlModel::create({}, *g.data.schema, 1);
  ag::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.tabular.encode(g.data.samples[0]).pooled.value());
  state.counters["attributes"] = static_cast<double>(g.data.schema->size());
}
BENCHMARK(BM_TabularEncode)->Arg(2)->Arg(16)->Arg(46);

void BM_ContrastiveStep(benchmark::State& state) {
  const synth::SynthDataset g = synth::generate(bench_synth(32));
  pretrain::PretrainModel model = pretrain::PretrainModel::create({}, *g.data.schema, 1);
  pretrain::PretrainConfig cfg;
  nn::Adam opt(model.parameters().vars(), cfg.optimizer);
  std::vector<std::size_t> batch(32);
  std::iota(batch.begin(), batch.end(), 0);
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(pretrain::pretrain_step(g.data, batch, cfg, rng, model, opt).loss);
}
BENCHMARK(BM_ContrastiveStep)->Unit(benchmark::kMillisecond);

void BM_DglStep(benchmark::State& state) {
  const synth::SynthDataset g = synth::generate(bench_synth(32));
  finetune::RovtlModel model = finetune::RovtlModel::create({}, *g.data.schema, 1);
  finetune::FinetuneConfig cfg;
  cfg.training = state.range(0) ? finetune::TrainingMode::dgl : finetune::TrainingMode::joint;
  nn::Adam opt = finetune::make_optimizer(model, cfg);
  std::vector<std::size_t> batch(32);
  std::iota(batch.begin(), batch.end(), 0);
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(finetune::dgl_step(g.data, batch, model, opt, cfg, rng).multi);
}
BENCHMARK(BM_DglStep)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_RandomSweep(benchmark::State& state) {
  const synth::SynthDataset g = synth::generate(bench_synth(128));
  const finetune::RovtlModel model = finetune::RovtlModel::create({}, *g.data.schema, 1);
  eval::SweepOptions opt;
  for (auto _ : state) benchmark::DoNotOptimize(eval::sweep(model, g.data, opt).mean);
}
BENCHMARK(BM_RandomSweep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
