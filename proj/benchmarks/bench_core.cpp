#include <benchmark/benchmark.h>

#include "pcgap/encoder_opt.hpp"
#include "pcgap/gap_analysis.hpp"
#include "pcgap/neural.hpp"

using namespace pcgap;

namespace {

void BM_LyapunovSolve(benchmark::State& state) {
  const auto spec = build_highdim_spec(static_cast<int>(state.range(0)), 0.05, 0.05, -0.5, 0.10);
  for (auto _ : state) benchmark::DoNotOptimize(solve_covariance_general(spec));
  state.SetLabel("dim " + std::to_string(spec.dim()));
}
BENCHMARK(BM_LyapunovSolve)->Arg(1)->Arg(10)->Arg(50)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_LatentRiskGradient(benchmark::State& state) {
  const auto spec = build_highdim_spec(static_cast<int>(state.range(0)), 0.05, 0.05, -0.5, 0.10);
  const RiskLandscape land(spec, solve_covariance_general(spec));
  Eigen::VectorXd w = Eigen::VectorXd::Ones(spec.dim()).normalized();
  for (auto _ : state) benchmark::DoNotOptimize(land.gradient(w, RiskVariant::kLatent));
}
BENCHMARK(BM_LatentRiskGradient)->Arg(1)->Arg(100);

void BM_AngularProfile(benchmark::State& state) {
  const auto spec = kReferencePoint.to_spec();
  const auto cov = solve_covariance_closed_form(spec);
  for (auto _ : state) benchmark::DoNotOptimize(angular_profile(spec, cov, RiskVariant::kLatent));
}
BENCHMARK(BM_AngularProfile)->Unit(benchmark::kMicrosecond);

void BM_SphereMinimization(benchmark::State& state) {
  const auto spec = build_highdim_spec(static_cast<int>(state.range(0)), 0.05, 0.05, -0.95, 0.10);
  const auto cov = solve_covariance_general(spec);
  SphereOptions opts;
  opts.restarts = 10;
  opts.threads = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(minimize_sphere(spec, cov, RiskVariant::kLatent, 0.0, opts));
  }
}
BENCHMARK(BM_SphereMinimization)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_GruLossAndGradient(benchmark::State& state) {
  const auto spec = kReferencePoint.to_spec();
  const auto batch = sample_trajectories(spec, 4, 80, 1);
  const auto windows = make_windows(batch, {0, 1, 2, 3}, 20, PredictionMode::kUnconstrained);
  Rng rng(2, 0);
  const auto model = GruPredictor::init(2, static_cast<int>(state.range(0)),
                                        PredictionMode::kUnconstrained, rng);
  Eigen::VectorXd grad;
  for (auto _ : state) benchmark::DoNotOptimize(gru_loss(model, windows, &grad));
  state.SetItemsProcessed(state.iterations() * windows.size());
}
BENCHMARK(BM_GruLossAndGradient)->Arg(32)->Unit(benchmark::kMicrosecond);

void BM_MlpLossAndGradient(benchmark::State& state) {
  const auto spec = kReferencePoint.to_spec();
  const auto batch = sample_trajectories(spec, 400, 20, 3);
  std::vector<int> all(400);
  for (int i = 0; i < 400; ++i) all[static_cast<std::size_t>(i)] = i;
  const auto data = make_transitions(batch, all);
  Rng rng(4, 0);
  const auto model = MlpEncoder::init(64, rng);
  Eigen::VectorXd grad;
  for (auto _ : state) benchmark::DoNotOptimize(mlp_loss(model, data, &grad));
  state.SetItemsProcessed(state.iterations() * data.size());
}
BENCHMARK(BM_MlpLossAndGradient)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
