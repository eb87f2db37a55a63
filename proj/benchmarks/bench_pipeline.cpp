#include <benchmark/benchmark.h>

#include "speedrs/ideal_gas.hpp"
#include "speedrs/neural.hpp"
#include "speedrs/rng.hpp"
#include "speedrs/sde.hpp"
#include "speedrs/signature.hpp"

namespace {

using namespace speedrs;

void BM_SimulateRBergomi(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_rbergomi(RBergomiSpec{}, SimGrid{1.0, 14}, n, ++seed));
}
BENCHMARK(BM_SimulateRBergomi)->Arg(400)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_ExpectedSignature(benchmark::State& state) {
  const auto b = simulate_gbm(GbmSpec{0.1, 0.4, 1.0}, SimGrid{1.0, 14}, static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(expected_signature(b, 3));
}
BENCHMARK(BM_ExpectedSignature)->Arg(400)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_IdealGas(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const IdealGasSpec spec{5.0, n, static_cast<double>(n)};
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_ideal_gas(spec, SimGrid{1.0, 19}, ++seed));
}
BENCHMARK(BM_IdealGas)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);

void BM_MlpEpoch(benchmark::State& state) {
  const MlpSpec spec{28, static_cast<std::size_t>(state.range(0)), Activation::Relu};
  Mlp net = mlp_init(spec, 1);
  Rng rng(2);
  Dataset d;
  d.x.resize(2400, 28);
  d.y.resize(2400);
  for (Eigen::Index i = 0; i < d.x.size(); ++i) d.x.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y(i) = rng.normal();
  TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(mlp_train(net, d, nullptr, cfg));
}
BENCHMARK(BM_MlpEpoch)->Arg(25)->Arg(60)->Arg(90)->Unit(benchmark::kMillisecond);

}  // namespace
