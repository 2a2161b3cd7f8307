#include "dbm/one_body.hpp"
#include "dbm/phase.hpp"
#include "dbm/simulator.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

using namespace dbm;

namespace {

const ModelSpec kSpec = make_spec({0.5, 0.5}, {4.0}, {0.1, 0.1});

DisorderSample sample(int n) { return sample_disorder(kSpec, SystemSize::from_alpha(kSpec.alpha, n), 11); }

void BM_EnumerateParallel(benchmark::State& state) {
  const auto d = sample(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(exact_enumerate(d));
  state.counters["threads"] = omp_get_max_threads();
}
BENCHMARK(BM_EnumerateParallel)->Arg(12)->Arg(16)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_EnumerateReference(benchmark::State& state) {
  const auto d = sample(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(exact_enumerate_reference(d));
}
BENCHMARK(BM_EnumerateReference)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);

GibbsOptions gibbs_options() {
  GibbsOptions o;
  o.sweeps = 200;
  o.burn_in = 50;
  o.seed = 3;
  return o;
}

void BM_BlockGibbs(benchmark::State& state) {
  const auto d = sample(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_block_gibbs(d, gibbs_options()));
  state.SetItemsProcessed(state.iterations() * gibbs_options().sweeps * state.range(0));
}
BENCHMARK(BM_BlockGibbs)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_BlockGibbsReference(benchmark::State& state) {
  const auto d = sample(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_block_gibbs_reference(d, gibbs_options()));
  state.SetItemsProcessed(state.iterations() * gibbs_options().sweeps * state.range(0));
}
BENCHMARK(BM_BlockGibbsReference)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_QuenchedEnumeration(benchmark::State& state) {
  QuenchedOptions o;
  o.n_disorder = 32;
  o.base_seed = 5;
  const auto size = SystemSize::from_alpha(kSpec.alpha, 16);
  for (auto _ : state) benchmark::DoNotOptimize(quenched_run(kSpec, size, o));
}
BENCHMARK(BM_QuenchedEnumeration)->Unit(benchmark::kMillisecond);

void BM_PhaseScan(benchmark::State& state) {
  ScanRequest req;
  req.base = make_spec({0.5, 0.5}, {1.0}, {0.1, 0.1});
  for (int i = 0; i <= 20; ++i) req.values.push_back(1.0 + 0.1 * i);
  for (auto _ : state) benchmark::DoNotOptimize(scan(req));
}
BENCHMARK(BM_PhaseScan)->Unit(benchmark::kMillisecond);

void BM_BigF(benchmark::State& state) {
  double h = 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(big_f(h));
    h = h < 10.0 ? h * 1.001 : 0.3;
  }
}
BENCHMARK(BM_BigF);

}  // namespace

BENCHMARK_MAIN();
