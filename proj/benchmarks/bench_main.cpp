#include <benchmark/benchmark.h>

#include "leitnerq/log_store.hpp"
#include "leitnerq/lqn_sim.hpp"
#include "leitnerq/memory_models.hpp"
#include "leitnerq/model_eval.hpp"
#include "leitnerq/planner.hpp"
#include "leitnerq/synthetic.hpp"

using namespace leitnerq;

namespace {

SimConfig session_config() {
  SimConfig c;
  c.n_decks = 5;
  c.rate_rule = RateRule::kBudgetTight;
  c.theta = 0.0077;
  c.budget = 0.1902;
  c.lambda_ext = 0.01;
  c.max_events = 500;
  c.max_unique_items = 50;
  return c;
}

void BM_SolveFlowBalance(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto plan = optimize_schedule(n, 1.0, 0.01);
  const double lambda_ext = 0.8 * plan.schedule.lambda_ext;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_flow_balance(plan.schedule.mu, lambda_ext, 0.01));
  }
}
BENCHMARK(BM_SolveFlowBalance)->Arg(5)->Arg(20)->Arg(50);

void BM_OptimizeSchedule(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(optimize_schedule(n, 1.0, 0.01));
}
BENCHMARK(BM_OptimizeSchedule)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_OptimizeMultiDifficulty(benchmark::State& state) {
  const double thetas[] = {0.001, 0.1};
  for (auto _ : state) benchmark::DoNotOptimize(optimize_multi_difficulty(20, 1.0, thetas));
}
BENCHMARK(BM_OptimizeMultiDifficulty)->Unit(benchmark::kMillisecond);

void BM_SimulateSession(benchmark::State& state) {
  const auto c = session_config();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(c, ++seed));
}
BENCHMARK(BM_SimulateSession);

void BM_SweepPhaseTransition(benchmark::State& state) {
  const auto c = session_config();
  const std::vector<double> rates = {0.002, 0.004, 0.010, 0.015, 0.020, 0.023,
                                     0.029, 0.050, 0.076, 0.095, 0.11, 0.19};
  for (auto _ : state) benchmark::DoNotOptimize(sweep_arrival_rates(c, rates, 200, 2016, 1));
}
BENCHMARK(BM_SweepPhaseTransition)->Unit(benchmark::kMillisecond);

void BM_EvaluateEfc(benchmark::State& state) {
  SyntheticLogOptions o;
  o.interactions = static_cast<std::size_t>(state.range(0));
  o.seed = 3;
  const auto histories = build_histories(generate_efc_logs(o));
  const auto plan = make_fold_plan(histories, 10, 0.2, 0.1, 3);
  const std::vector<ModelSpec> models = {model_from_row(8)};
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_models(histories, models, plan));
}
BENCHMARK(BM_EvaluateEfc)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_FitIrt(benchmark::State& state) {
  SyntheticLogOptions o;
  o.interactions = 20000;
  o.seed = 4;
  std::vector<Sample> samples;
  for (const auto& h : build_histories(generate_efc_logs(o))) {
    const auto part = samples_of(h, 0, h.interactions.size());
    samples.insert(samples.end(), part.begin(), part.end());
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_model(model_from_row(3), samples, 0.1, TimeUnit::kDays));
  }
}
BENCHMARK(BM_FitIrt)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
