#include <benchmark/benchmark.h>

#include <torch/torch.h>

#include "dsnet/fusion.hpp"

namespace {

// The DGM similarity matrix is HW x HW, so cost grows with the fourth power
// of the side length.
void BM_DgmForward(benchmark::State& state) {
  torch::set_num_threads(1);
  torch::NoGradGuard no_grad;
  const int64_t side = state.range(0), channels = 32;
  dsnet::Dgm dgm(channels, true, side * side);
  const auto r = torch::randn({1, channels, side, side}), d = torch::randn({1, channels, side, side});
  for (auto _ : state) benchmark::DoNotOptimize(dgm->forward(r, d));
  state.SetComplexityN(side * side);
}
BENCHMARK(BM_DgmForward)->Arg(8)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_DimLevel(benchmark::State& state) {
  torch::set_num_threads(1);
  torch::NoGradGuard no_grad;
  const int64_t side = state.range(0), channels = 32;
  dsnet::DimLevel dim(channels, dsnet::FusionOptions{});
  const auto rs = torch::randn({1, channels, side, side}), rd = torch::randn({1, channels, side, side});
  const auto d = torch::randn({1, channels, side, side});
  for (auto _ : state) benchmark::DoNotOptimize(dim->forward(rs, rd, d).fused);
}
BENCHMARK(BM_DimLevel)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

}  // namespace
