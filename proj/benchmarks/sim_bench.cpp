#include <benchmark/benchmark.h>

#include <vector>

#include "fshe/field_sim.hpp"

using namespace fshe;

namespace {

CorrelationKernel noise_for(int which) {
  return which == 0 ? CorrelationKernel::white_noise(1) : CorrelationKernel::riesz(0.5, 1);
}

}  // namespace

static void NoiseSample(benchmark::State& state) {
  const Lattice lattice = make_lattice(1, 16.0, static_cast<int>(state.range(1)));
  const NoiseSampler sampler(lattice, noise_for(static_cast<int>(state.range(0))));
  Rng rng = make_stream(1, 0);
  std::vector<double> out(lattice.site_count());
  for (auto _ : state) {
    sampler.sample(1e-3, rng, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(NoiseSample)->ArgsProduct({{0, 1}, {512, 4096}});

static void NoiseSample2d(benchmark::State& state) {
  const Lattice lattice = make_lattice(2, 8.0, static_cast<int>(state.range(0)));
  const NoiseSampler sampler(lattice, CorrelationKernel::riesz(0.5, 2));
  Rng rng = make_stream(1, 0);
  std::vector<double> out(lattice.site_count());
  for (auto _ : state) {
    sampler.sample(1e-3, rng, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(NoiseSample2d)->Arg(64)->Arg(128);

static void MildStep(benchmark::State& state) {
  const Lattice lattice = make_lattice(1, 16.0, static_cast<int>(state.range(0)));
  const MildStepper stepper(StableKernelSpec(1.5, 1), SigmaSpec::linear(0.5),
                            CorrelationKernel::white_noise(1), lattice, 1e-3);
  Rng rng = make_stream(1, 0);
  std::vector<double> u(lattice.site_count(), 1.0);
  for (auto _ : state) {
    stepper.advance(u, rng);
    benchmark::DoNotOptimize(u.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(MildStep)->RangeMultiplier(4)->Range(256, 1 << 14)->Complexity();

static void RunPath(benchmark::State& state) {
  SimulationConfig c;
  c.spec = StableKernelSpec(1.5, 1);
  c.sigma = SigmaSpec::linear(0.5);
  c.lattice = make_lattice(1, 8.0, 256);
  c.u0.assign(c.lattice.site_count(), 1.0);
  c.dt = 1e-3;
  c.t_end = 0.1;
  c.trunc_level = 1e6;
  c.snapshot_times = {0.05, 0.1};
  const MildStepper stepper(c.spec, c.sigma, c.noise, c.lattice, c.dt);
  std::uint64_t id = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_path(c, stepper, 1, id++));
}
BENCHMARK(RunPath)->Unit(benchmark::kMillisecond);
