#include "betarobust/dataset.hpp"
#include "betarobust/estimation.hpp"
#include "betarobust/inference.hpp"
#include "betarobust/numeric.hpp"
#include "betarobust/simulation.hpp"
#include "betarobust/tuning.hpp"

#include <benchmark/benchmark.h>

#include <string>

using namespace betarobust;

namespace {

ModelSpec ais() {
  return load_csv(std::string(BETAROBUST_DATA_DIR) + "/ais_rowing.csv", "BFP", {"LBM"}, {});
}

ModelSpec scenario_sample(int n) {
  const ScenarioConfig c = scenario_preset(1, n, 0.05, 3);
  Rng rng = substream(c.seed, 0);
  return generate_scenario(c, rng).contaminated;
}

void BM_Digamma(benchmark::State& state) {
  double x = 0.37;
  for (auto _ : state) {
    benchmark::DoNotOptimize(digamma(x));
    x = x < 200.0 ? x * 1.7 : 0.37;
  }
}
BENCHMARK(BM_Digamma);

void BM_LqGradient(benchmark::State& state) {
  const ModelSpec spec = scenario_sample(static_cast<int>(state.range(0)));
  const Theta theta{Eigen::Vector2d(-1.8, -2.0), Eigen::VectorXd::Constant(1, 4.5)};
  for (auto _ : state) benchmark::DoNotOptimize(lq_gradient(spec, theta, 0.9));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LqGradient)->Arg(40)->Arg(160)->Arg(1280);

void BM_MdpdeGradient(benchmark::State& state) {
  const ModelSpec spec = scenario_sample(static_cast<int>(state.range(0)));
  const Theta theta{Eigen::Vector2d(-1.8, -2.0), Eigen::VectorXd::Constant(1, 4.5)};
  for (auto _ : state) benchmark::DoNotOptimize(mdpde_gradient(spec, theta, 0.9));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MdpdeGradient)->Arg(40)->Arg(160);

void BM_FitSmle(benchmark::State& state) {
  const ModelSpec spec = ais();
  for (auto _ : state) benchmark::DoNotOptimize(fit(spec, EstimatorKind::smle(0.82)));
}
BENCHMARK(BM_FitSmle)->Unit(benchmark::kMicrosecond);

void BM_Sandwich(benchmark::State& state) {
  const ModelSpec spec = ais();
  const Theta theta = fit(spec, EstimatorKind::smle(0.82)).theta_hat;
  for (auto _ : state) benchmark::DoNotOptimize(sandwich(spec, theta, 0.82));
}
BENCHMARK(BM_Sandwich)->Unit(benchmark::kMicrosecond);

void BM_SelectQ(benchmark::State& state) {
  const ModelSpec spec = ais();
  for (auto _ : state) benchmark::DoNotOptimize(select_q(spec, EstimatorKind::Family::smle));
}
BENCHMARK(BM_SelectQ)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
