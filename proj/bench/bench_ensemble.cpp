#include <benchmark/benchmark.h>
#include <omp.h>

#include <numbers>
#include <vector>

#include "cavcool/ensemble.hpp"
#include "cavcool/motion.hpp"
#include "cavcool/spin.hpp"

using namespace cavcool;

namespace {

PhysParams params_for(int n) {
  PhysParams p;
  p.n_atoms = n;
  p.gamma_c = 0.1;
  p.w = n == 1 ? 0.15 : (n <= 20 ? 0.28 : 1.3);
  return p;
}

EnsembleConfig ensemble_for(int n) {
  EnsembleConfig cfg;
  cfg.params = params_for(n);
  cfg.n_traj = 32;
  cfg.t_final = n == 1 ? 2000.0 : (n <= 20 ? 20.0 : 5.0);
  cfg.record.sample_stride = 50;
  return cfg;
}

void BM_EnsembleSerial(benchmark::State& state) {
  const EnsembleConfig cfg = ensemble_for(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_ensemble_serial(cfg));
  state.counters["trajectories/s"] = benchmark::Counter(cfg.n_traj, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_EnsembleParallel(benchmark::State& state) {
  const EnsembleConfig cfg = ensemble_for(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_ensemble(cfg));
  state.counters["trajectories/s"] = benchmark::Counter(cfg.n_traj, benchmark::Counter::kIsIterationInvariantRate);
  state.counters["threads"] = omp_get_max_threads();
}

struct KernelFixture {
  explicit KernelFixture(int n) : m(n), x(n), stepper(n) {
    Rng rng(1);
    for (auto& v : x) v = 2.0 * std::numbers::pi * rng.uniform();
    for (auto& v : m.pop()) v = 0.5 + 0.4 * rng.uniform();
    for (auto& c : m.coh()) c = cplx(0.02 * (rng.uniform() - 0.5), 0.02 * (rng.uniform() - 0.5));
    mode.update(x);
  }
  SpinMoments m;
  std::vector<double> x;
  ModeFunctions mode;
  SpinStepper stepper;
};

void BM_SpinRk4Step(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  KernelFixture f(n);
  const SpinRates rates{0.1, 0.1, 1.3};
  const double dt = 0.1 / (n * 0.1);
  for (auto _ : state) {
    f.stepper.advance(f.m, f.mode, rates, dt, 1, SpinScheme::rk4);
    benchmark::ClobberMemory();
  }
}

Eigen::MatrixXd diffusion_for(int n) {
  KernelFixture f(n);
  PhysParams p = params_for(n);
  return diffusion_matrix(f.x, f.m, derive_rates(p), p) + 1e-3 * Eigen::MatrixXd::Identity(n, n);
}

void BM_FactorCholesky(benchmark::State& state) {
  const Eigen::MatrixXd d = diffusion_for(static_cast<int>(state.range(0)));
  Eigen::LLT<Eigen::MatrixXd> llt(d.rows());
  for (auto _ : state) {
    llt.compute(d);
    benchmark::DoNotOptimize(llt.matrixLLT().data());
  }
}

void BM_FactorEigenClamp(benchmark::State& state) {
  const Eigen::MatrixXd d = diffusion_for(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(psd_project_and_factor(d));
}

}  // namespace

BENCHMARK(BM_EnsembleSerial)->Arg(1)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EnsembleParallel)->Arg(1)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SpinRk4Step)->Arg(20)->Arg(60);
BENCHMARK(BM_FactorCholesky)->Arg(20)->Arg(60);
BENCHMARK(BM_FactorEigenClamp)->Arg(20)->Arg(60);

BENCHMARK_MAIN();
