// Serial reference vs OpenMP variant of each data-parallel kernel.

#include <benchmark/benchmark.h>

#include "oracles.hpp"
#include "schedlab/baselines.hpp"
#include "schedlab/drl.hpp"

using namespace schedlab;

namespace {

ExecPolicy policy_of(const benchmark::State& state) {
  return state.range(0) == 0 ? ExecPolicy::kSerial : ExecPolicy::kParallel;
}

SystemConfig bench_config() {
  SystemConfig c;
  c.users = 3;
  c.rbs = 6;
  c.flags = {true, true, true};
  return c;
}

void BM_KddpgLosses(benchmark::State& state) {
  SystemConfig c = bench_config();
  c.batch_size = static_cast<int>(state.range(1));
  Trainer tr(c);
  tr.run_episode();
  Rng rng(1);
  const SampledBatch drawn = tr.memory().sample(c.batch_size, SamplingMode::kUniform, rng);
  TrainingBatch batch;
  for (std::size_t i : drawn.indices) {
    batch.items.push_back(&tr.memory().at(i));
    batch.u.push_back(1.0);
  }
  const ExecPolicy exec = policy_of(state);
  for (auto _ : state)
    benchmark::DoNotOptimize(kddpg_losses(batch, tr.networks(), c.gamma, exec).critic_loss);
  state.SetLabel(exec == ExecPolicy::kSerial ? "serial" : "parallel");
}
BENCHMARK(BM_KddpgLosses)->ArgsProduct({{0, 1}, {20, 256}});

void BM_BaselineEvaluation(benchmark::State& state) {
  const SystemConfig c = bench_config();
  const auto factory = baseline_factory(BaselineKind::kEarliestDeadlineFirst, c, true);
  const ExecPolicy exec = policy_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(c, factory, 16, 1, exec).mean_loss);
  state.SetLabel(exec == ExecPolicy::kSerial ? "serial" : "parallel");
}
BENCHMARK(BM_BaselineEvaluation)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MarkovCounts(benchmark::State& state) {
  const ExecPolicy exec = policy_of(state);
  for (auto _ : state)
    benchmark::DoNotOptimize(oracle::markov_counts(0.1, 5, 7, 8, 100000, 1, exec).slots);
  state.SetLabel(exec == ExecPolicy::kSerial ? "serial" : "parallel");
}
BENCHMARK(BM_MarkovCounts)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
