#include "dsnet/layers.hpp"

#include "dsnet/errors.hpp"

namespace dsnet {

namespace F = torch::nn::functional;

NormKind parse_norm(std::string_view name) {
  if (name == "group") return NormKind::group;
  if (name == "batch") return NormKind::batch;
  throw ConfigError("unknown normalization '" + std::string(name) + "' (expected group|batch)");
}

std::string_view to_string(NormKind kind) {
  return kind == NormKind::group ? "group" : "batch";
}

int64_t norm_groups(int64_t channels) {
  for (int64_t g = std::min<int64_t>(8, channels); g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

torch::nn::AnyModule make_norm(int64_t channels, NormKind kind) {
  if (kind == NormKind::group) {
    return torch::nn::AnyModule(
        torch::nn::GroupNorm(torch::nn::GroupNormOptions(norm_groups(channels), channels)));
  }
  return torch::nn::AnyModule(torch::nn::BatchNorm2d(channels));
}

torch::nn::Conv2d conv3x3(int64_t in, int64_t out, int64_t stride, int64_t dilation, bool bias) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3)
                               .stride(stride)
                               .padding(dilation)
                               .dilation(dilation)
                               .bias(bias));
}

torch::nn::Conv2d conv1x1(int64_t in, int64_t out, bool bias) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1).bias(bias));
}

torch::nn::Sequential conv_block(int64_t in, int64_t out, NormKind norm) {
  torch::nn::Sequential seq;
  seq->push_back(conv3x3(in, out));
  seq->push_back(make_norm(out, norm));
  seq->push_back(torch::nn::ReLU());
  seq->push_back(conv3x3(out, out));
  return seq;
}

torch::Tensor upsample_to(const torch::Tensor& x, int64_t height, int64_t width) {
  if (x.size(2) == height && x.size(3) == width) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor per_sample_mean(const torch::Tensor& x) { return x.flatten(1).mean(1); }

void zero_parameters(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& p : module.parameters()) p.zero_();
}

}  // namespace dsnet
