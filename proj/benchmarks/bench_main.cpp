#include <benchmark/benchmark.h>

#include "rrm/blocks.hpp"
#include "rrm/network.hpp"
#include "rrm/ops.hpp"
#include "rrm/scan_order.hpp"
#include "rrm/ssm.hpp"

using namespace rrm;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v));
}

void BM_BuildAllEight(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(all_eight(n, n));
}
BENCHMARK(BM_BuildAllEight)->Arg(8)->Arg(16)->Arg(64);

void BM_SelectiveScan(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const ssm::LtiParams p{{0.9, 0.8, 0.7, 0.6}, {0.1, 0.2, 0.3, 0.4}, {1, 1, 1, 1}, 0.5};
  const auto steps = p.broadcast(len);
  std::vector<double> x(len, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(ssm::selective_scan(x, steps));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_SelectiveScan)->Arg(64)->Arg(1024);

void BM_SS2D(benchmark::State& state) {
  const auto dirs = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const SelectiveScan2d ss(16, 4, dirs, rng);
  const Tensor x = random_tensor({16, 16, 16}, 2);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ss(x));
}
BENCHMARK(BM_SS2D)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({c, 32, 32}, 3);
  const Tensor w = random_tensor({c, c, 3, 3}, 4);
  const Tensor b = random_tensor({c}, 5);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1));
  state.counters["MACs"] = static_cast<double>(c * c * 9 * 32 * 32);
}
BENCHMARK(BM_Conv2d)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_NetworkForward(benchmark::State& state) {
  NetworkConfig cfg;
  cfg.scan_directions = static_cast<std::size_t>(state.range(0));
  const RetinexRawMamba net(cfg, 0);
  const Tensor x = random_tensor({4, 16, 16}, 6);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_NetworkForward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_NetworkTrainStep(benchmark::State& state) {
  const RetinexRawMamba net(NetworkConfig{}, 0);
  const Tensor x = random_tensor({4, 16, 16}, 7);
  for (auto _ : state) {
    const auto out = net.forward(x);
    backward(add(sum(out.raw), sum(out.srgb)));
  }
}
BENCHMARK(BM_NetworkTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
