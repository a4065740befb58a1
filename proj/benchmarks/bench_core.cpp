#include <benchmark/benchmark.h>

#include "atxy/ed.hpp"
#include "atxy/entanglement.hpp"
#include "atxy/freefermion.hpp"
#include "atxy/model.hpp"
#include "atxy/openquantum.hpp"
#include "atxy/rdm.hpp"

using namespace atxy;

namespace {

ModelParams fs_params(int n, double gamma, double l2) {
  ModelParams p;
  p.N = n;
  p.gamma = gamma;
  p.lambda2 = l2;
  p.lambda1 = lambda1_on_fs(gamma, l2);
  return p;
}

void bm_proxy_thermal_point(benchmark::State& state) {
  const auto p = fs_params(0, 0.6, 1.0);
  const auto proto = FieldProtocol::quench_to_zero(p.lambda1, p.lambda2);
  ProxyCorrelators solver(p, proto, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solver.at(80.0, 0.0));
}
BENCHMARK(bm_proxy_thermal_point)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

void bm_proxy_quench_point(benchmark::State& state) {
  const auto p = fs_params(0, 0.6, 1.0);
  const auto proto = FieldProtocol::quench_to_zero(p.lambda1, p.lambda2);
  ProxyCorrelators solver(p, proto, 4096);
  solver.at(80.0, 1.0);  // build the time tables once
  for (auto _ : state) benchmark::DoNotOptimize(solver.at(80.0, 10.0));
}
BENCHMARK(bm_proxy_quench_point)->Unit(benchmark::kMillisecond);

void bm_exact_chain_point(benchmark::State& state) {
  const auto p = fs_params(static_cast<int>(state.range(0)), 0.6, 1.0);
  const auto proto = FieldProtocol::quench_to_zero(p.lambda1, p.lambda2);
  ExactChainCorrelators solver(p, proto);
  for (auto _ : state) benchmark::DoNotOptimize(solver.at(5.0, 0.7));
}
BENCHMARK(bm_exact_chain_point)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

void bm_ed_thermal(benchmark::State& state) {
  const auto p = fs_params(static_cast<int>(state.range(0)), 0.6, 1.0);
  const auto H = build_hamiltonian(p, p.lambda1, p.lambda2);
  for (auto _ : state) benchmark::DoNotOptimize(thermal_state(H, 80.0));
}
BENCHMARK(bm_ed_thermal)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

void bm_rk4_step(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto p = fs_params(n, 0.6, 1.0);
  const auto h_pre = build_hamiltonian(p, p.lambda1, p.lambda2);
  const auto h_post = build_hamiltonian(p, 0.0, 0.0);
  const DenseState rho0 = thermal_state(h_pre, 80.0);
  BathSpec bath;
  bath.doors = {1};
  IntegratorOptions opts;
  opts.dt = 1e-3;
  opts.observe_interval = 0.05;  // 50 steps per observation
  opts.check_integrity = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        integrate(rho0, h_post, bath, LadderChoice::ladder, 0.05, {{1, 2}}, opts));
  }
  state.SetItemsProcessed(state.iterations() * 50);  // RK4 steps
}
BENCHMARK(bm_rk4_step)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

void bm_log_negativity(benchmark::State& state) {
  CorrelatorSet c;
  c.mz_e = -0.3;
  c.mz_o = 0.2;
  c.txx = -0.4;
  c.tyy = 0.3;
  c.tzz = -0.2;
  const TwoSiteState rho = assemble(c);
  for (auto _ : state) benchmark::DoNotOptimize(log_negativity(rho));
}
BENCHMARK(bm_log_negativity);

}  // namespace

BENCHMARK_MAIN();
