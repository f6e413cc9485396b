#include <benchmark/benchmark.h>

#include <random>

#include <swarmvv/checker.hpp>
#include <swarmvv/lfsim.hpp>
#include <swarmvv/macro.hpp>
#include <swarmvv/markov.hpp>
#include <swarmvv/pipeline.hpp>
#include <swarmvv/propspec.hpp>

using namespace swarmvv;

namespace {

DiscreteSeries ramp_series(int n) {
  CleanSeries c;
  c.sample_period_s = 1.0;
  c.samples.resize(n);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    auto& s = c.samples[i];
    s.t = i;
    const double x = u(rng);
    s.p = {x, 0, 0, 1 - x, 0, 0};
    s.flag[0] = i % 17 == 0;
    s.freq[0] = s.flag[0] ? 1.0 : 0.0;
  }
  return discretize_ewd(c, 5);
}

void BM_BoundedReach(benchmark::State& state) {
  const MarkovModel m = build_model(ramp_series(static_cast<int>(state.range(0))), BuildMode::PerStateChain);
  const Checker checker(m);
  const auto p = swarmvv::bind(parse_property(R"(P=? [ F<=T "unsafe_red" ])"), m, {{"T", double(state.range(0))}});
  for (auto _ : state) benchmark::DoNotOptimize(checker.check(p).value);
}
BENCHMARK(BM_BoundedReach)->Arg(200)->Arg(1000);

void BM_CumulativeReward(benchmark::State& state) {
  const MarkovModel m = build_model(ramp_series(200), BuildMode::PerStateChain);
  const Checker checker(m);
  const auto p = swarmvv::bind(parse_property(R"(R{"avoidance_states"}=? [ C<=200 ])"), m);
  for (auto _ : state) benchmark::DoNotOptimize(checker.check(p).value);
}
BENCHMARK(BM_CumulativeReward);

void BM_RunTrial(benchmark::State& state) {
  const ScenarioConfig cfg = smoke_scenario();
  const ZoneMap zones = build_zone_map(cfg);
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(run_trial(cfg, zones, seed++).n_steps);
}
BENCHMARK(BM_RunTrial)->Unit(benchmark::kMillisecond);

void BM_ParseProperty(benchmark::State& state) {
  const std::string text = R"(P=? [ F[100,199] (s=4&l>=3) | !"unsafe_red" & timestep<50 ])";
  for (auto _ : state) benchmark::DoNotOptimize(parse_property(text));
}
BENCHMARK(BM_ParseProperty);

void BM_MacroStep(benchmark::State& state) {
  const MacroParams p{0.3, 0.2, 0.1, static_cast<int>(state.range(0)), 5};
  PopulationVector pop = PopulationVector::all_searching(p.t_s, p.n);
  for (auto _ : state) {
    pop = step(pop, p);
    benchmark::DoNotOptimize(pop.total());
  }
}
BENCHMARK(BM_MacroStep)->Arg(10)->Arg(50);

}  // namespace
BENCHMARK_MAIN();
