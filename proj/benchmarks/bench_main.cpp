#include <benchmark/benchmark.h>

#include "gradcheck.hpp"
#include "mtgb/dataset_io.hpp"
#include "mtgb/poisoner.hpp"

namespace {

using namespace mtgb;

ModelConfig bench_config(Arch arch) {
  ModelConfig c;
  c.arch = arch;
  c.num_layers = 3;
  c.hidden_dim = 64;
  c.num_classes = 4;
  c.input_dim = 3;
  return c;
}

const GraphDataset& fixture_graphs() {
  static const GraphDataset ds = generate_synthetic({4, 8, 30, 3, 1.5, 7});
  return ds;
}

void BM_Forward(benchmark::State& state) {
  const auto model = init_model(bench_config(static_cast<Arch>(state.range(0))));
  const GraphDataset& ds = fixture_graphs();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, ds[i++ % ds.size()]));
  state.SetLabel(to_string(model.config.arch));
}
BENCHMARK(BM_Forward)->DenseRange(0, 2);

void BM_LossAndGrad(benchmark::State& state) {
  const auto model = init_model(bench_config(static_cast<Arch>(state.range(0))));
  const GraphDataset& ds = fixture_graphs();
  std::vector<Sample> batch;
  for (const Graph& g : ds.graphs()) batch.push_back({&g, g.label(), 1.0});
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(model, batch));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
  state.SetLabel(to_string(model.config.arch));
}
BENCHMARK(BM_LossAndGrad)->DenseRange(0, 2);

void BM_Inject(benchmark::State& state) {
  Rng rng(1);
  const Graph host = testing::random_graph(rng, static_cast<std::size_t>(state.range(0)), 0.2, 3);
  Trigger trig;
  trig.graph = testing::random_graph(rng, 6, 0.8, 3);
  InjectionOptions opts;
  opts.strategy = InjectionStrategy::highest_similarity;
  for (auto _ : state) benchmark::DoNotOptimize(inject(host, trig, opts, rng));
}
BENCHMARK(BM_Inject)->Arg(30)->Arg(300);

}  // namespace
BENCHMARK_MAIN();
