#include <benchmark/benchmark.h>

#include <random>

#include "rwevade/detectors.hpp"
#include "rwevade/evasion.hpp"
#include "rwevade/forest.hpp"
#include "rwevade/synthgen.hpp"

using namespace rwevade;

namespace {

Dataset random_dataset(std::size_t rows, std::size_t arity, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Dataset d(std::vector<std::string>(arity, "f"));
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> row(arity);
    for (auto& v : row) v = u(rng);
    d.add(row, row[0] + 0.3 * row[1] > 0.6 ? 1 : 0);
  }
  return d;
}

struct Setup {
  GenConfig cfg = GenConfig::defaults();
  FileCensus census = gen_census(cfg);
  Trace ransom = gen_ransomware_trace(census, cfg, 0);
};

const Setup& setup() {
  static Setup s;
  return s;
}

}  // namespace

static void BM_TrainForest(benchmark::State& state) {
  Dataset d = random_dataset(static_cast<std::size_t>(state.range(0)), 6, 1);
  for (auto _ : state) benchmark::DoNotOptimize(train_forest(d, {}, 10, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 10);
}
BENCHMARK(BM_TrainForest)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_PredictForest(benchmark::State& state) {
  Forest f = train_forest(random_dataset(5000, 6, 2), {}, 100, 2);
  std::vector<double> x{0.3, 0.5, 0.1, 0.9, 0.4, 0.2};
  for (auto _ : state) benchmark::DoNotOptimize(f.predict(x));
}
BENCHMARK(BM_PredictForest);

static void BM_TickFeatures(benchmark::State& state) {
  const auto& s = setup();
  auto schedule = tick_schedule();
  for (auto _ : state) {
    auto ticks = locate_ticks(s.ransom, s.census, schedule);
    for (std::size_t k = 0; k < ticks.size(); ++k)
      benchmark::DoNotOptimize(extract_features6(s.ransom, tier_interval(ticks, k, 6, TierSpec{}), s.census));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.ransom.events.size()));
}
BENCHMARK(BM_TickFeatures)->Unit(benchmark::kMillisecond);

static void BM_WindowFeatures(benchmark::State& state) {
  const auto& s = setup();
  for (auto _ : state) benchmark::DoNotOptimize(windowed_features(s.ransom));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.ransom.events.size()));
}
BENCHMARK(BM_WindowFeatures)->Unit(benchmark::kMillisecond);

static void BM_ProcessSplit(benchmark::State& state) {
  const auto& s = setup();
  for (auto _ : state) benchmark::DoNotOptimize(process_split(s.ransom, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_ProcessSplit)->Arg(2)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
