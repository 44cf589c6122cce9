#pragma once

#include <torch/torch.h>

#include <string_view>

namespace dsnet {

enum class NormKind { group, batch };

NormKind parse_norm(std::string_view name);
std::string_view to_string(NormKind kind);

/// Largest divisor of `channels` that is at most 8; the group count used for
/// group normalization.
int64_t norm_groups(int64_t channels);

/// Group or batch normalization over `channels` feature maps.
torch::nn::AnyModule make_norm(int64_t channels, NormKind kind);

torch::nn::Conv2d conv3x3(int64_t in, int64_t out, int64_t stride = 1, int64_t dilation = 1,
                          bool bias = true);
torch::nn::Conv2d conv1x1(int64_t in, int64_t out, bool bias = true);

/// Conv(3x3) -> Norm -> ReLU -> Conv(3x3), spatial size preserved. Index 3 of
/// the returned sequence is the final convolution.
torch::nn::Sequential conv_block(int64_t in, int64_t out, NormKind norm);

/// Bilinear resize with align_corners = false.
torch::Tensor upsample_to(const torch::Tensor& x, int64_t height, int64_t width);

/// Mean over every dimension but the first: one value per batch element.
torch::Tensor per_sample_mean(const torch::Tensor& x);

/// Zeroes every parameter of `module` (weights and biases).
void zero_parameters(torch::nn::Module& module);

}  // namespace dsnet
