// serial reference vs OpenMP kernels
#include <benchmark/benchmark.h>

#include "margulab/mme.hpp"
#include "margulab/region.hpp"
#include "margulab/splitting.hpp"

using namespace ml;

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::Parallel : Exec::Serial; }

MapDescriptor bump_x() {
  MapDescriptor f;
  f.epsilon = 0.05;
  f.shape = Shape::BumpX;
  return f;
}

void BM_Lyapunov(benchmark::State& st) {
  MapDescriptor f;
  f.epsilon = 0.05;
  LyapunovOptions o;
  o.n_samples = 512;
  o.horizon = 100;
  o.exec = exec_of(st);
  for (auto _ : st) benchmark::DoNotOptimize(lyapunov(f, volume_sampler(), ExponentKind::Center, o).value);
}

void BM_EllSeries(benchmark::State& st) {
  LeafChart c(bump_x(), MTPoint(TorusPoint(0.13, 0.77), 0.0));
  ColumnRegion r = ColumnRegion::rect(0, 0.03, 0, 1, 4);
  QuadOptions q;
  q.exec = exec_of(st);
  for (auto _ : st) benchmark::DoNotOptimize(ell_series(c, r, 6, q).back());
}

void BM_BoxModel(benchmark::State& st) {
  BoxSpec s{32, 32, 16, 2};
  for (auto _ : st) {
    BoxModel m = build_box_model(bump_x(), s, exec_of(st));
    perron(m, 1e-12, 20000, exec_of(st));
    benchmark::DoNotOptimize(m.rho);
  }
}

}  // namespace

// arg 0 = serial reference, 1 = parallel
BENCHMARK(BM_Lyapunov)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EllSeries)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BoxModel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
