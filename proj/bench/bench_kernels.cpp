// Serial reference implementations against the OpenMP kernels.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "metaimpact/estimators.hpp"
#include "metaimpact/event_study.hpp"
#include "metaimpact/impact.hpp"
#include "metaimpact/parallel.hpp"
#include "metaimpact/segmenter.hpp"
#include "metaimpact/synthgen.hpp"

using namespace metaimpact;

namespace {

struct Fixture {
  SyntheticOutput data;
  MarketIndex index;
  MetaOrderSet set;
  Isolation isolation;

  Fixture() : data(generate(scenario())), index(data.tape) {
    SegmentationConfig cfg;
    set = segment(data.tape, index, cfg).metaorders;
    isolation = select_isolated(set, index, IsolationConfig{});
  }

  static SyntheticScenario scenario() {
    SyntheticScenario sc;
    sc.n_days = 2;
    sc.n_traders = 150;
    sc.metaorders_per_trader_per_day = 2.0;
    sc.base_daily_volume = 100;
    return sc;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void set_threads(const benchmark::State& state) { parallel::set_workers(static_cast<int>(state.range(0))); }

void BM_SegmentReference(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(reference::segment(f.data.tape, f.index, SegmentationConfig{}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.data.tape.size()));
}

void BM_Segment(benchmark::State& state) {
  const Fixture& f = fixture();
  set_threads(state);
  for (auto _ : state) benchmark::DoNotOptimize(segment(f.data.tape, f.index, SegmentationConfig{}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.data.tape.size()));
}

void BM_ImpactsReference(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(reference::compute_impacts(f.data.tape, f.set, ImpactConfig{}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.set.size()));
}

void BM_Impacts(benchmark::State& state) {
  const Fixture& f = fixture();
  set_threads(state);
  for (auto _ : state) benchmark::DoNotOptimize(compute_impacts(f.data.tape, f.index, f.set, ImpactConfig{}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.set.size()));
}

void BM_EventStudyReference(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::event_study(f.data.tape, f.set, EventStudyConfig{}, &f.isolation));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.set.size()));
}

void BM_EventStudy(benchmark::State& state) {
  const Fixture& f = fixture();
  set_threads(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(event_study(f.data.tape, f.index, f.set, EventStudyConfig{}, &f.isolation));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.set.size()));
}

std::vector<int> random_signs(std::size_t n) {
  std::mt19937_64 rng(3);
  std::vector<int> s(n);
  for (int& x : s) x = (rng() & 1) ? 1 : -1;
  return s;
}

void BM_SignAcfReference(benchmark::State& state) {
  const auto signs = random_signs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::sign_acf(signs, 1000));
}

void BM_SignAcf(benchmark::State& state) {
  const auto signs = random_signs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sign_acf(signs, 1000));
}

}  // namespace

BENCHMARK(BM_SegmentReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Segment)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ImpactsReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Impacts)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EventStudyReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EventStudy)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SignAcfReference)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SignAcf)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
