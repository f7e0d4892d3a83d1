#include <benchmark/benchmark.h>

#include <crowdsense/reuse_bounds.hpp>

namespace cs = crowdsense;

namespace {

void BM_SingleItemGain(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(cs::mc_gain_single_item(n, n, 10000, 3).gamma.mean);
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_SingleItemGain)->Arg(2)->Arg(50)->Arg(200);

void BM_MultiItemGain(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(cs::mc_gain_multi_item(12, 12, K, 0.5, 20, 3).gamma.mean);
  state.SetItemsProcessed(state.iterations() * 20);
}
BENCHMARK(BM_MultiItemGain)->Arg(1)->Arg(3)->Arg(5);

void BM_OrderStatisticPdf(benchmark::State& state) {
  const auto u = cs::Distribution::uniform(0.0, 1.0);
  double x = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cs::order_stat_pdf(3, 50, x, u));
    x = x < 1.0 ? x + 1e-3 : 0.0;
  }
}
BENCHMARK(BM_OrderStatisticPdf);

}  // namespace
