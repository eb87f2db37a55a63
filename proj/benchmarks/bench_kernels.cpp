#include <benchmark/benchmark.h>

#include "speedrs/mmd.hpp"
#include "speedrs/sde.hpp"
#include "speedrs/sigkernel.hpp"
#include "speedrs/signature.hpp"

namespace {

using namespace speedrs;

std::vector<Path> sample(std::size_t n, std::size_t length, std::uint64_t seed) {
  const auto b = simulate_gbm(GbmSpec{0.1, 0.4, 1.0}, SimGrid{1.0, length - 1}, n, seed);
  return kernel_inputs(b);
}

void BM_Goursat(benchmark::State& state) {
  const auto paths = sample(2, static_cast<std::size_t>(state.range(0)), 1);
  GoursatConfig cfg;
  cfg.dyadic_order = static_cast<unsigned>(state.range(1));
  const auto gram = static_gram(paths[0], paths[1], StaticKernel::rbf(0.5));
  for (auto _ : state) benchmark::DoNotOptimize(goursat_from_gram(gram, cfg));
}
BENCHMARK(BM_Goursat)->Args({15, 0})->Args({15, 1})->Args({15, 2})->Args({100, 1})->Args({100, 2});

void BM_Signature(benchmark::State& state) {
  const auto paths = sample(1, 15, 2);
  const auto level = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(signature_truncated(paths[0], level));
}
BENCHMARK(BM_Signature)->DenseRange(2, 6);

void BM_Mmd1(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = sample(n, 15, 3), b = sample(n, 15, 4);
  for (auto _ : state) benchmark::DoNotOptimize(mmd1_unbiased(a, b, StaticKernel::rbf(0.5), GoursatConfig{}));
}
BENCHMARK(BM_Mmd1)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_Mmd2(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = sample(n, 15, 5), b = sample(n, 15, 6);
  Mmd2Options opt;
  for (auto _ : state) benchmark::DoNotOptimize(mmd2_unbiased(a, b, opt));
}
BENCHMARK(BM_Mmd2)->Arg(10)->Arg(30)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace
