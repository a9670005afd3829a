#include <benchmark/benchmark.h>

#include <omp.h>

#include "dlstf/parallel.hpp"
#include "dlstf/rng.hpp"

using namespace dlstf;

namespace {

struct Fixture {
  LstmNetwork net;
  std::vector<Sample> samples;
  std::vector<std::size_t> batch;
};

// Shapes of a two-layer cascade model on six stations with a 12-hour window.
const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    const std::vector<std::size_t> widths{64, 64};
    out.net = init_params(widths, 6, 1);
    Rng rng(2);
    out.samples.resize(256);
    for (auto& s : out.samples) {
      for (int t = 0; t < 12; ++t) {
        Vector x(6);
        for (double& v : x) v = rng.uniform01();
        s.sequence.push_back(std::move(x));
      }
      s.target = Vector(6);
      for (double& v : s.target) v = rng.uniform01();
    }
    for (std::size_t k = 0; k < 32; ++k) out.batch.push_back(k);
    return out;
  }();
  return f;
}

void BM_BatchGradientSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::batch_gradient_serial(f.net, f.samples, f.batch));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.batch.size()));
}

void BM_BatchGradientOmp(benchmark::State& state) {
  const auto& f = fixture();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::batch_gradient_omp(f.net, f.samples, f.batch));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.batch.size()));
}

void BM_TotalMaeSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::total_mae_serial(f.net, f.samples));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.samples.size()));
}

void BM_TotalMaeOmp(benchmark::State& state) {
  const auto& f = fixture();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::total_mae_omp(f.net, f.samples));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.samples.size()));
}

}  // namespace

BENCHMARK(BM_BatchGradientSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientOmp)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TotalMaeSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TotalMaeOmp)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
