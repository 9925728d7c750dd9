#include <benchmark/benchmark.h>

#include "dualdp/bench.hpp"
#include "dualdp/gddp.hpp"

namespace {

using namespace dualdp;

ProblemPtr random_system(int n, int m) {
  Rng rng(42);
  RandomSystemConfig cfg;
  cfg.n = n;
  cfg.m = m;
  return generate_random_system(cfg, rng);
}

// Approximation with `bounds` cuts built from random states.
ValueApprox grown(const ProblemPtr& p, int bounds) {
  Rng rng(7);
  GddpConfig cfg;
  cfg.check_every = 0;
  cfg.max_iterations = bounds;
  return run_gddp(p, sample_states(p->n, 20, 5.0, rng), cfg).V;
}

void BM_OneStageConvex(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int bounds = static_cast<int>(state.range(1));
  const ProblemPtr p = random_system(n, 1);
  const ValueApprox V = grown(p, bounds);
  const Vector x = Vector::Constant(n, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_onestage_convex(*p, V, x));
  state.counters["bounds"] = static_cast<double>(V.size());
}
BENCHMARK(BM_OneStageConvex)->ArgsProduct({{1, 2, 4, 8}, {1, 20, 100}})->Unit(benchmark::kMicrosecond);

void BM_OneStageBruteForce(benchmark::State& state) {
  const ProblemPtr p = ball_and_beam_problem();
  const ValueApprox V(p->n);
  const Vector x = ball_and_beam_start();
  for (auto _ : state) benchmark::DoNotOptimize(solve_onestage_bruteforce(*p, V, x));
}
BENCHMARK(BM_OneStageBruteForce)->Unit(benchmark::kMillisecond);

void BM_GddpIteration(benchmark::State& state) {
  const ProblemPtr p = random_system(static_cast<int>(state.range(0)), 1);
  Rng rng(3);
  GddpConfig cfg;
  GddpState s(p->n, sample_states(p->n, 50, 5.0, rng));
  for (auto _ : state) gddp_iterate(p, s, cfg, rng);
  state.counters["bounds"] = static_cast<double>(s.V.size());
}
BENCHMARK(BM_GddpIteration)->Arg(2)->Arg(4)->Iterations(100)->Unit(benchmark::kMicrosecond);

void BM_MeasureErrors(benchmark::State& state) {
  const ProblemPtr p = random_system(2, 1);
  Rng rng(5);
  GddpConfig cfg;
  cfg.jobs = static_cast<int>(state.range(0));
  GddpState s(p->n, sample_states(p->n, 50, 5.0, rng));
  s.V = grown(p, 30);
  for (auto _ : state) benchmark::DoNotOptimize(measure_errors(*p, s, cfg));
}
BENCHMARK(BM_MeasureErrors)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
