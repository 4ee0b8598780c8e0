#include <benchmark/benchmark.h>

#include <vector>

#include "fshe/lattice.hpp"
#include "fshe/stable_kernel.hpp"

using namespace fshe;

static void EvalKernel(benchmark::State& state) {
  const double alpha = static_cast<double>(state.range(0)) / 10.0;
  const StableKernelSpec spec(alpha, 1);
  double x = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval_kernel(spec, 1.0, point1(x)));
    x = x < 20.0 ? x + 0.37 : 0.0;
  }
}
// 10 and 20 hit the closed forms, the others the series / Fourier route.
BENCHMARK(EvalKernel)->Arg(10)->Arg(12)->Arg(15)->Arg(18)->Arg(20);

static void StableDensityLookup(benchmark::State& state) {
  const StableDensity density(StableKernelSpec(1.5, 1));
  double r = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(density(0.5, r));
    r = r < 20.0 ? r + 0.37 : 0.0;
  }
}
BENCHMARK(StableDensityLookup);

static void Semigroup(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const StableKernelSpec spec(1.5, 1);
  ScalarField u(make_lattice(1, 16.0, n), 1.0);
  for (auto _ : state) {
    propagate_in_place(spec, 1e-3, u);
    benchmark::DoNotOptimize(u.values.data());
  }
  state.SetComplexityN(n);
}
BENCHMARK(Semigroup)->RangeMultiplier(4)->Range(256, 1 << 16)->Complexity();

static void SampleStable(benchmark::State& state) {
  Rng rng = make_stream(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(sample_symmetric_stable(1.5, rng));
}
BENCHMARK(SampleStable);
