#include <benchmark/benchmark.h>

#include <torch/torch.h>

#include "dsnet/config.hpp"
#include "dsnet/losses.hpp"
#include "dsnet/model.hpp"
#include "dsnet/pipeline.hpp"

namespace {

void BM_DdcnnForward(benchmark::State& state) {
  torch::set_num_threads(1);
  torch::NoGradGuard no_grad;
  dsnet::ModelConfig config;
  config.input_size = state.range(0);
  dsnet::Ddcnn model(config);
  model->eval();
  const auto s = config.input_size;
  const auto rgb = torch::rand({1, 3, s, s}), depth = torch::rand({1, 1, s, s});
  for (auto _ : state) benchmark::DoNotOptimize(model->forward(rgb, depth).prediction.saliency);
}
BENCHMARK(BM_DdcnnForward)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

// One supervised SGD step on a labeled batch of four at 64 px.
void BM_SupervisedStep(benchmark::State& state) {
  torch::set_num_threads(1);
  dsnet::ModelConfig config;
  config.input_size = 64;
  dsnet::Ddcnn model(config);
  auto sgd = dsnet::make_sgd(model->parameters(), dsnet::RunConfig{});
  const auto rgb = torch::rand({4, 3, 64, 64}), depth = torch::rand({4, 1, 64, 64});
  const auto gt = (torch::rand({4, 1, 64, 64}) > 0.5).to(torch::kFloat);
  for (auto _ : state) {
    const auto out = model->forward(rgb, depth);
    auto loss = dsnet::supervised_loss(out.prediction.saliency, gt, out.prediction.depth, depth, 1.0);
    sgd->zero_grad();
    loss.backward();
    sgd->step();
  }
}
BENCHMARK(BM_SupervisedStep)->Unit(benchmark::kMillisecond);

}  // namespace
