#include <benchmark/benchmark.h>

#include "cbfmp/scenarios.hpp"

using namespace cbfmp;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

void BM_SolveLyapunov(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Vector gammas(n);
  for (int i = 0; i < n; ++i) gammas(i) = 1.0 + i;
  const GammaSpec spec = build_gamma_spec(gammas);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_lyapunov(spec.A_gamma));
  }
}
BENCHMARK(BM_SolveLyapunov)->Arg(2)->Arg(3)->Arg(4);

void BM_Rk4StepCartpole(benchmark::State& state) {
  const Vector x = vec({0.1, 0.5, -0.2, 0.3});
  const auto field = [](const Vector& s, double) { return cartpole_dynamics(4.0, s, 1.0); };
  for (auto _ : state) {
    benchmark::DoNotOptimize(rk4_step(field, x, 0.0, 1e-3));
  }
}
BENCHMARK(BM_Rk4StepCartpole);

void BM_MinNormFilter(benchmark::State& state) {
  const Scenario s = make_linear_si({});
  const Vector x = vec({0.5, -0.2, 1.0});
  const Vector u_ref = vec({-20.0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(min_norm_filter(s.chain, s.gamma, x, u_ref));
  }
}
BENCHMARK(BM_MinNormFilter);

void BM_SolveQpSmall(benchmark::State& state) {
  const Vector u_ref = vec({0.3, -0.7});
  AffineConstraint barrier;
  barrier.a = vec({1, 0});
  barrier.b = 1.0;
  barrier.label = "barrier";
  AffineConstraint stabilize;
  stabilize.kind = AffineConstraint::Kind::Equality;
  stabilize.a = vec({0.5, 1});
  stabilize.b = -2.0;
  stabilize.label = "internal";
  const std::vector<AffineConstraint> rows{barrier, stabilize};
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_qp_small(u_ref, rows));
  }
}
BENCHMARK(BM_SolveQpSmall);

void BM_ClfCbfQpStep(benchmark::State& state) {
  const Scenario s = make_cartpole_mi({});
  const Vector x = vec({0.1, 0.4, -0.3, 2.0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(s.policy(x, 0.0));
  }
}
BENCHMARK(BM_ClfCbfQpStep);

void BM_SimulateLinearSecond(benchmark::State& state) {
  LinearSiConfig cfg;
  cfg.sim.horizon = 1.0;
  const Scenario s = make_linear_si(cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(s.run());
  }
}
BENCHMARK(BM_SimulateLinearSecond)->Unit(benchmark::kMillisecond);

void BM_ExtractInternalLinear(benchmark::State& state) {
  Matrix A(3, 3);
  A << 0, 1, 0, 0, 0, 0, 3, 1, -1;
  Vector b(3);
  b << 0, 1, 0;
  RowVector c(3);
  c << 1, 0, 0;
  const GammaSpec spec = build_gamma_spec(vec({2, 3}));
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_internal_linear(A, b, c, spec));
  }
}
BENCHMARK(BM_ExtractInternalLinear);

}  // namespace

BENCHMARK_MAIN();
