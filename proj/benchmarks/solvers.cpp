#include <random>

#include <benchmark/benchmark.h>

#include <wbc/barycenter.hpp>
#include <wbc/consensus.hpp>
#include <wbc/transport.hpp>

using namespace wbc;

namespace {

DiscreteMeasure cloud(Eigen::Index m, Eigen::Index d, double shift, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return DiscreteMeasure::uniform(Matrix::NullaryExpr(m, d, [&] { return shift + u(rng); }));
}

GaussianMeasure gaussian(int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix G = Matrix::NullaryExpr(d, d, [&] { return normal(rng); });
  return GaussianMeasure(Vector::NullaryExpr(d, [&] { return normal(rng); }),
                         G * G.transpose() + Matrix::Identity(d, d));
}

void BM_W2Gaussian(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto a = gaussian(d, 1), b = gaussian(d, 2);
  for (auto _ : state) benchmark::DoNotOptimize(w2_gaussian(a, b));
}
BENCHMARK(BM_W2Gaussian)->Arg(2)->Arg(8)->Arg(32);

void BM_Wp1d(benchmark::State& state) {
  const auto a = cloud(state.range(0), 1, 0.0, 1), b = cloud(state.range(0), 1, 0.5, 2);
  for (auto _ : state) benchmark::DoNotOptimize(wp_1d(a, b, 2.0));
}
BENCHMARK(BM_Wp1d)->Arg(1000)->Arg(100000);

void BM_ExactLp(benchmark::State& state) {
  const auto a = cloud(state.range(0), 2, 0.0, 1), b = cloud(state.range(0), 2, 0.5, 2);
  SolverConfig cfg;
  cfg.max_plan_entries = static_cast<std::size_t>(state.range(0) * state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(wp_discrete_exact(a, b, 2.0, cfg).distance);
}
BENCHMARK(BM_ExactLp)->Arg(100)->Arg(400)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Sinkhorn(benchmark::State& state) {
  const auto a = cloud(state.range(0), 2, 0.0, 1), b = cloud(state.range(0), 2, 0.5, 2);
  SolverConfig cfg;
  cfg.method = TransportMethod::sinkhorn;
  cfg.sinkhorn_epsilon = 1e-2;
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn(a, b, cfg).distance);
}
BENCHMARK(BM_Sinkhorn)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_GaussianBarycenter(benchmark::State& state) {
  std::vector<Measure> ms;
  for (int j = 0; j < 5; ++j) ms.emplace_back(gaussian(static_cast<int>(state.range(0)), 10 + j));
  BarycenterProblem p(ms, std::vector<double>(5, 0.2));
  SolverConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(bar_gaussian(p, cfg));
}
BENCHMARK(BM_GaussianBarycenter)->Arg(2)->Arg(8);

void BM_FreeSupportBarycenter(benchmark::State& state) {
  std::vector<Measure> ms;
  for (int j = 0; j < 4; ++j) ms.emplace_back(cloud(state.range(0), 2, 0.3 * j, 20 + j));
  BarycenterProblem p(ms, std::vector<double>(4, 0.25));
  SolverConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(bar_free_support(p, state.range(0), cfg, 0));
}
BENCHMARK(BM_FreeSupportBarycenter)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_GaussianConsensusRound(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  ConsensusState s;
  for (int i = 0; i < n; ++i) s.agents.emplace_back(gaussian(3, 100 + static_cast<std::uint64_t>(i)));
  const auto schedule =
      generate_schedule(ScheduleKind::random_jointly_connected, n, 3, 0.05, 1, 1);
  SolverConfig cfg;
  cfg.method = TransportMethod::closed_form;
  for (auto _ : state) benchmark::DoNotOptimize(step(s, schedule, cfg, 0));
}
BENCHMARK(BM_GaussianConsensusRound)->Arg(5)->Arg(20);

}  // namespace

BENCHMARK_MAIN();
