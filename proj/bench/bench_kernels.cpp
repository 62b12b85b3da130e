// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <vector>

#include "mcu/curves.hpp"
#include "mcu/eval.hpp"
#include "mcu/experiment.hpp"
#include "mcu/kernels.hpp"
#include "mcu/rng.hpp"

namespace {

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
  mcu::Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

void BM_MatmulParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    mcu::kernels::matmul(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
}

void BM_MatmulSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    mcu::kernels::matmul_reference(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
}

BENCHMARK(BM_MatmulParallel)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_MatmulSerial)->Arg(64)->Arg(128)->Arg(256);

struct CurveFixture {
  mcu::PreparedData data;
  mcu::EvalContext ctx;
  mcu::CurveSpec spec;

  CurveFixture() {
    mcu::ExperimentConfig cfg;
    cfg.data.n = 400;
    data = mcu::prepare_data(cfg);
    const auto a = mcu::init_mlp(data.arch, 1).params;
    const auto b = mcu::init_mlp(data.arch, 2).params;
    ctx = mcu::EvalContext::make(data.arch, data.split, mcu::init_mlp(data.arch, 3).params,
                                 mcu::init_mlp(data.arch, 4).params);
    spec = mcu::make_bezier(a, b);
  }
};

const CurveFixture& fixture() {
  static const CurveFixture f;
  return f;
}

void BM_EvaluateCurveParallel(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    auto r = mcu::evaluate_curve(f.ctx, f.spec, 16, mcu::default_workers());
    benchmark::DoNotOptimize(r.data());
  }
}

void BM_EvaluateCurveSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    auto r = mcu::evaluate_curve_serial(f.ctx, f.spec, 16);
    benchmark::DoNotOptimize(r.data());
  }
}

BENCHMARK(BM_EvaluateCurveParallel);
BENCHMARK(BM_EvaluateCurveSerial);

}  // namespace

BENCHMARK_MAIN();
