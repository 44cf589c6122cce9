#include <benchmark/benchmark.h>

#include <torch/torch.h>

#include "dsnet/metrics.hpp"

namespace {

struct Pair {
  torch::Tensor pred;
  torch::Tensor gt;
};

Pair make_pair(int64_t side) {
  torch::manual_seed(0);
  auto gt = torch::zeros({side, side}, torch::kFloat64);
  gt.slice(0, side / 4, 3 * side / 4).slice(1, side / 3, 2 * side / 3).fill_(1);
  auto pred = (0.6 * gt + 0.4 * torch::rand({side, side}, torch::kFloat64)).clamp(0, 1);
  return {pred, gt};
}

void BM_SMeasure(benchmark::State& state) {
  const auto p = make_pair(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(dsnet::s_measure(p.pred, p.gt));
}
BENCHMARK(BM_SMeasure)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_FMeasureMax(benchmark::State& state) {
  const auto p = make_pair(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(dsnet::f_measure_max(p.pred, p.gt));
}
BENCHMARK(BM_FMeasureMax)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_EMeasureMax(benchmark::State& state) {
  const auto p = make_pair(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(dsnet::e_measure_max(p.pred, p.gt));
}
BENCHMARK(BM_EMeasureMax)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_EvaluatePair(benchmark::State& state) {
  const auto p = make_pair(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(dsnet::evaluate_pair(p.pred, p.gt).s_measure);
}
BENCHMARK(BM_EvaluatePair)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
