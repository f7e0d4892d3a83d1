#include <benchmark/benchmark.h>

#include <crowdsense/mechanisms.hpp>
#include <crowdsense/scenario_gen.hpp>
#include <crowdsense/welfare.hpp>

namespace cs = crowdsense;

namespace {

cs::Scenario market(int users) {
  cs::GenConfig c;
  c.I = users;
  c.J = 12;
  c.K = 8;
  c.width = c.height = 520;
  c.seed = 17;
  return cs::generate(c);
}

void BM_Generate(benchmark::State& state) {
  cs::GenConfig c;
  c.I = static_cast<int>(state.range(0));
  c.J = 50;
  c.K = 30;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cs::generate(c));
    ++c.seed;
  }
}
BENCHMARK(BM_Generate)->Arg(50)->Arg(200);

void BM_SolveFractional(benchmark::State& state) {
  const cs::Scenario sc = market(static_cast<int>(state.range(0)));
  const auto problem = cs::WelfareProblem::truthful(sc);
  for (auto _ : state) benchmark::DoNotOptimize(cs::solve_fractional(problem).objective);
}
BENCHMARK(BM_SolveFractional)->Arg(8)->Arg(16)->Arg(32);

void BM_SolveIntegerNoReuse(benchmark::State& state) {
  const cs::Scenario sc = market(static_cast<int>(state.range(0)));
  const auto problem = cs::WelfareProblem::truthful(sc, cs::ReuseMode::kNoReuse);
  for (auto _ : state) benchmark::DoNotOptimize(cs::solve_integer(problem).objective);
}
BENCHMARK(BM_SolveIntegerNoReuse)->Arg(8)->Arg(16);

void BM_FractionalVcg(benchmark::State& state) {
  const cs::Scenario sc = market(static_cast<int>(state.range(0)));
  const cs::Bids truth = cs::Bids::truthful(sc);
  for (auto _ : state) benchmark::DoNotOptimize(cs::fractional_vcg(sc, truth).welfare);
}
BENCHMARK(BM_FractionalVcg)->Arg(8)->Arg(16);

void BM_RandomizedAuction(benchmark::State& state) {
  const cs::Scenario sc = market(static_cast<int>(state.range(0)));
  const cs::Bids truth = cs::Bids::truthful(sc);
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(cs::randomized_auction(sc, truth, seed++).welfare);
}
BENCHMARK(BM_RandomizedAuction)->Arg(8)->Arg(16);

}  // namespace
