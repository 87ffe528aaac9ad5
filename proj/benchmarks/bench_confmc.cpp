#include <benchmark/benchmark.h>

#include "confmc/completion.hpp"
#include "confmc/conformal.hpp"
#include "confmc/experiments.hpp"
#include "confmc/propensity.hpp"

using namespace confmc;

namespace {

WeightedEmpirical random_empirical(std::size_t n) {
  RandomSource rng(1);
  WeightedEmpirical d;
  for (std::size_t k = 0; k < n; ++k) {
    d.atoms.push_back(rng.normal());
    d.weights.push_back(1.0 / static_cast<double>(n + 1));
  }
  d.infinity_weight = 1.0 / static_cast<double>(n + 1);
  return d;
}

PreparedTrial desk_trial(Index d) {
  SyntheticConfig c = preset_config("desk");
  c.rows = c.cols = d;
  RandomSource rng(c.seed, 0);
  const SyntheticInstance inst = generate_instance(c, rng);
  return prepare_trial(inst.truth, inst.probabilities, c.pipeline, rng);
}

}  // namespace

static void BM_WeightedQuantile(benchmark::State& state) {
  const WeightedEmpirical d = random_empirical(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(weighted_quantile(d, 0.9));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_WeightedQuantile)->RangeMultiplier(8)->Range(64, 1 << 15)->Complexity();

static void BM_Als(benchmark::State& state) {
  const PreparedTrial trial = desk_trial(state.range(0));
  AlsOptions options;
  options.rank = 3;
  for (auto _ : state) benchmark::DoNotOptimize(als_fit(trial.train, options));
}
BENCHMARK(BM_Als)->Arg(80)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_OneBit(benchmark::State& state) {
  const Index d = state.range(0);
  RandomSource rng(3);
  const Matrix p = gen_hetero_propensity(d, d, 1, rng);
  Mask train(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) train(i, j) = rng.bernoulli(0.8 * p(i, j));
  for (auto _ : state) benchmark::DoNotOptimize(fit_onebit(train, 0.8));
}
BENCHMARK(BM_OneBit)->Arg(80)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_CmcIntervals(benchmark::State& state) {
  const PreparedTrial trial = desk_trial(state.range(0));
  const CompletionEstimate est = fit_base(trial.train, BaseLearner{}, 3, trial.p_hat_scalar);
  const Matrix h = Matrix::Constant(trial.truth.rows(), trial.truth.cols(), 1.0);
  const bool exact = state.range(1) != 0;
  for (auto _ : state) {
    if (exact)
      benchmark::DoNotOptimize(exact_split_intervals(est, h, trial.split, trial.observed, 0.1));
    else
      benchmark::DoNotOptimize(cmc_intervals(est, h, trial.split, trial.observed, 0.1));
  }
}
BENCHMARK(BM_CmcIntervals)->Args({80, 0})->Args({80, 1})->Args({200, 0})->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
