#include <benchmark/benchmark.h>

#include "duality_lab/analysis_toolkit.hpp"
#include "duality_lab/conditional_duality.hpp"
#include "duality_lab/minimax_bridge.hpp"
#include "duality_lab/stability_lab.hpp"

namespace {

using namespace dlab;

FilteredSpace binary_tree(int periods) {
  const std::size_t n = std::size_t{1} << periods;
  std::vector<Partition> parts;
  for (int t = 0; t <= periods; ++t) {
    const std::size_t width = n >> t;
    Partition p;
    for (std::size_t c = 0; c < (std::size_t{1} << t); ++c) {
      std::vector<int> cell;
      for (std::size_t s = c * width; s < (c + 1) * width; ++s) cell.push_back(static_cast<int>(s));
      p.push_back(cell);
    }
    parts.push_back(p);
  }
  return FilteredSpace(std::vector<double>(n, 1.0 / static_cast<double>(n)), parts);
}

// Symmetric +-0.1 binomial increments with lambda = 1 in every period.
MarketModel binomial_market(int periods) {
  FilteredSpace sp = binary_tree(periods);
  const std::size_t n = sp.size();
  std::vector<RandomVariable> dm, lam;
  for (int t = 1; t <= periods; ++t) {
    RandomVariable x(n);
    const std::size_t width = n >> t;
    for (std::size_t s = 0; s < n; ++s) x[s] = (s / width) % 2 == 0 ? 0.1 : -0.1;
    dm.push_back(x);
    lam.emplace_back(n, 1.0);
  }
  return MarketModel::build(std::move(sp), std::move(dm), std::move(lam));
}

void BM_DualSolve(benchmark::State& state) {
  const MarketModel m = binomial_market(static_cast<int>(state.range(0)));
  const StoppingTime tau = StoppingTime::constant(m.space().size(), 0);
  const RandomVariable eta(m.space().size(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(dual_solve(m, UtilityPair::log(), tau, eta));
}
BENCHMARK(BM_DualSolve)->DenseRange(1, 4)->Unit(benchmark::kMillisecond);

void BM_PrimalSolve(benchmark::State& state) {
  const MarketModel m = binomial_market(static_cast<int>(state.range(0)));
  const StoppingTime tau = StoppingTime::constant(m.space().size(), 0);
  const RandomVariable xi(m.space().size(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(primal_solve(m, UtilityPair::power(0.5), tau, xi));
}
BENCHMARK(BM_PrimalSolve)->DenseRange(1, 4)->Unit(benchmark::kMillisecond);

void BM_ConjugacyCheck(benchmark::State& state) {
  const MarketModel m = binomial_market(2);
  const StoppingTime tau = StoppingTime::constant(m.space().size(), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        conjugacy_check(m, UtilityPair::log(), tau, {0.5, 1.0, 2.0}, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_ConjugacyCheck)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_MinimaxReconcile(benchmark::State& state) {
  FilteredSpace sp({1.0 / 3, 1.0 / 3, 1.0 / 3}, {{{0, 1, 2}}, {{0}, {1}, {2}}});
  const MarketModel m = MarketModel::build(sp, {{0.1, 0.0, -0.1}}, {{0.0, 0.0, 0.0}});
  const double step = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(reconcile_minimax(m, UtilityPair::log(), StoppingTime::constant(3, 0),
                                               RandomVariable(3, 1.0), {step}, {4.0}));
  }
}
BENCHMARK(BM_MinimaxReconcile)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_StabilityRun(benchmark::State& state) {
  const MarketModel base = binomial_market(2);
  const MarketSequence seq(base, {RandomVariable(4, 1.0), RandomVariable(4, 1.0)}, DecayKind::kInverse,
                           static_cast<int>(state.range(0)));
  const StoppingTime tau = StoppingTime::constant(4, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        run_stability_experiment(seq, UtilityPair::log(), tau, RandomVariable(4, 1.0), RandomVariable(4, 1.0)));
  }
}
BENCHMARK(BM_StabilityRun)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ConvexNet(benchmark::State& state) {
  const MarketModel m = binomial_market(2);
  const SigmaAlgebra g = m.space().sigma_at(StoppingTime::constant(4, 1));
  const ConvexCompactSet k =
      ConvexCompactSet::order_interval(m.space(), g, RandomVariable(4, 0.5), RandomVariable(4, 2.0));
  for (auto _ : state) {
    const auto net = ftau_convex_net(k, 1e-2);
    benchmark::DoNotOptimize(net_cover_certificate(k, net, 1e-2, HullKind::kConvex, 10000, 7));
  }
}
BENCHMARK(BM_ConvexNet)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
