#pragma once

#include <torch/torch.h>

#include <array>
#include <string_view>
#include <vector>

#include "dsnet/core_types.hpp"
#include "dsnet/layers.hpp"

namespace dsnet {

struct AsppSpec {
  std::vector<int64_t> dilation_rates{1, 6, 12, 18};
  int64_t out_channels = 64;
};

enum class MergeMode { add, concat };

MergeMode parse_merge(std::string_view name);
std::string_view to_string(MergeMode mode);

struct DecoderOptions {
  /// Common width every fused level is projected to before merging.
  int64_t width = 64;
  MergeMode merge = MergeMode::add;
  std::vector<int64_t> aspp_rates{1, 6, 12, 18};
};

/// Parallel dilated 3x3 convolutions, concatenated and mixed by a 1x1
/// convolution. Spatial size is preserved.
class AsppImpl : public torch::nn::Module {
 public:
  AsppImpl(int64_t in_channels, const AsppSpec& spec);

  /// Throws InputTooSmall for maps smaller than 3x3.
  torch::Tensor forward(const torch::Tensor& x);

  std::vector<torch::nn::Conv2d>& branches() { return branches_; }
  torch::nn::Conv2d project() { return project_; }

 private:
  std::vector<torch::nn::Conv2d> branches_;
  torch::nn::Conv2d project_{nullptr};
};
TORCH_MODULE(Aspp);

/// Coarse-to-fine merging of the four fused levels into one saliency map.
class DecoderImpl : public torch::nn::Module {
 public:
  DecoderImpl(std::array<int64_t, kPyramidLevels> level_channels, const DecoderOptions& options);

  /// Folds merge_adjacent from level 4 down to level 1, then
  /// Conv(3x3) -> Conv(1x1) -> upsample -> sigmoid. B x 1 x target x target.
  /// Throws MissingLevel unless four levels are given.
  torch::Tensor forward(const std::vector<torch::Tensor>& fused, int64_t target_size);

  /// Refines `fine` (already at decoder width) with the ASPP of `fine_level`
  /// (1-based, 1..3) and merges it with the upsampled `coarse`. Throws
  /// ShapeMismatch unless `coarse` is exactly half the size of `fine`.
  torch::Tensor merge_adjacent(int fine_level, const torch::Tensor& fine, const torch::Tensor& coarse);

  Aspp aspp(int level) { return aspps_.at(level - 1); }

 private:
  DecoderOptions options_;
  std::vector<torch::nn::Conv2d> projections_;
  std::vector<Aspp> aspps_;
  std::vector<torch::nn::Conv2d> merges_;
  torch::nn::Conv2d head_conv_{nullptr};
  torch::nn::Conv2d head_out_{nullptr};
};
TORCH_MODULE(Decoder);

}  // namespace dsnet
