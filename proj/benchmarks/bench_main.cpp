#include <benchmark/benchmark.h>

#include <vector>

#include "hetplan/fixtures.hpp"
#include "hetplan/orchestrator.hpp"
#include "hetplan/parallel_planner.hpp"
#include "hetplan/rng.hpp"
#include "hetplan/scheduler.hpp"
#include "hetplan/simulator.hpp"
#include "hetplan/workload.hpp"

using namespace hetplan;

namespace {

Matrix random_bandwidth(int n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) m[i][j] = m[j][i] = 1e9 + 99e9 * rng.uniform();
  return m;
}

SloMatrix random_slo(std::size_t m, std::size_t n, Rng& rng) {
  SloMatrix d;
  d.d.assign(m, std::vector<double>(n));
  for (auto& row : d.d)
    for (double& v : row) v = rng.uniform();
  return d;
}

}  // namespace

static void BM_RoutePipeline(benchmark::State& state) {
  const auto bw = random_bandwidth(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(route_pipeline(bw));
}
BENCHMARK(BM_RoutePipeline)->Arg(4)->Arg(8)->Arg(12)->Arg(16);

static void BM_SolveRouting(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(9);
  const auto d = random_slo(k, k, rng);
  CapacityVector caps;
  for (std::size_t i = 0; i < k; ++i) {
    caps.prefill.push_back(1.0 + 3.0 * rng.uniform());
    caps.decode.push_back(1.0 + 3.0 * rng.uniform());
  }
  const double rate = 0.5 * static_cast<double>(k);
  for (auto _ : state) benchmark::DoNotOptimize(solve_routing(d, caps, rate, 0.9));
}
BENCHMARK(BM_SolveRouting)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

static void BM_Simulate(benchmark::State& state) {
  const auto sc = fixtures::scenario("cloud-coding");
  PlannerOptions o;
  o.tabu.n_step = 5;
  const auto planned = plan_deployment(sc.cluster, sc.model, sc.workload, sc.slo, {}, {}, o);
  const auto trace = trace_from_profile(sc.workload, sc.workload.arrival_rate,
                                        static_cast<std::size_t>(state.range(0)), 17);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        simulate(planned.plan.plan, sc.cluster, sc.model, trace, sc.slo, CostParams{}, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

// Cold score of the initial solution; memo cleared by a fresh evaluator.
static void BM_EvaluatorScore(benchmark::State& state) {
  const auto sc = fixtures::scenario("cloud-coding");
  Rng rng(5);
  const auto start = initial_solution(sc.cluster, sc.model, rng);
  for (auto _ : state) {
    Evaluator ev(sc.cluster, sc.model, sc.workload, sc.slo, {}, {});
    benchmark::DoNotOptimize(ev.score(start));
  }
}
BENCHMARK(BM_EvaluatorScore)->Unit(benchmark::kMillisecond);

static void BM_PlanSynthetic(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const auto cluster = fixtures::synthetic_cluster(n);
  const auto model = fixtures::llama_13b();
  const auto workload = fixtures::coding_profile(2.0 * n / 8.0);
  const auto slo = fixtures::reference_slo(model, workload, CostParams{}, 3.0);
  PlannerOptions o;
  o.tabu.n_step = 10;
  for (auto _ : state)
    benchmark::DoNotOptimize(plan_deployment(cluster, model, workload, slo, {}, {}, o));
}
BENCHMARK(BM_PlanSynthetic)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
