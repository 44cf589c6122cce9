#pragma once

#include <torch/torch.h>

#include <array>
#include <utility>
#include <vector>

#include "dsnet/core_types.hpp"
#include "dsnet/layers.hpp"

namespace dsnet {

/// Splits one RGB pyramid level into depth-aware and depth-dispelled parts and
/// rebuilds the level from the two halves.
class DecouplerImpl : public torch::nn::Module {
 public:
  DecouplerImpl(int64_t channels, NormKind norm, bool with_reconstruction = true);

  /// Returns (depth_aware, depth_dispelled), each shaped like `r`.
  std::pair<torch::Tensor, torch::Tensor> disentangle(const torch::Tensor& r);

  /// ConvBlock(Concat(depth_aware, depth_dispelled)). Throws ShapeMismatch
  /// when the two inputs differ in shape or do not match this level's width.
  torch::Tensor reconstruct(const torch::Tensor& depth_aware, const torch::Tensor& depth_dispelled);

  bool has_reconstruction() const { return !reconstruct_.is_empty(); }
  int64_t channels() const { return channels_; }

  torch::nn::Sequential depth_head() { return depth_head_; }
  torch::nn::Sequential saliency_head() { return saliency_head_; }
  torch::nn::Sequential reconstruction_block() { return reconstruct_; }

 private:
  int64_t channels_;
  torch::nn::Sequential depth_head_{nullptr};
  torch::nn::Sequential saliency_head_{nullptr};
  torch::nn::Sequential reconstruct_{nullptr};
};
TORCH_MODULE(Decoupler);

/// Upsamples levels 2..4 of the depth-aware stack to level-1 resolution,
/// concatenates, applies Conv(3x3) -> Conv(1x1), resizes to the target and
/// squashes through a sigmoid.
class DepthHeadImpl : public torch::nn::Module {
 public:
  explicit DepthHeadImpl(std::array<int64_t, kPyramidLevels> channels);

  /// Throws MissingLevel unless exactly four levels are given.
  torch::Tensor forward(const std::vector<torch::Tensor>& depth_aware, int64_t target_size);

  torch::nn::Conv2d fuse_conv() { return fuse_; }
  torch::nn::Conv2d project_conv() { return project_; }

 private:
  torch::nn::Conv2d fuse_{nullptr};
  torch::nn::Conv2d project_{nullptr};
};
TORCH_MODULE(DepthHead);

/// The depth estimation branch: one decoupler per pyramid level plus the depth head.
class DecouplingImpl : public torch::nn::Module {
 public:
  DecouplingImpl(std::array<int64_t, kPyramidLevels> channels, NormKind norm,
                 bool with_reconstruction = true);

  /// Disentangles every level; reconstructions are filled in only when the
  /// module was built with them.
  DecoupledFeatures forward(const FeaturePyramid& rgb);

  torch::Tensor predict_depth(const std::vector<torch::Tensor>& depth_aware, int64_t target_size) {
    return depth_head_->forward(depth_aware, target_size);
  }

  Decoupler level(int i) { return levels_.at(i); }
  DepthHead depth_head() { return depth_head_; }

 private:
  std::vector<Decoupler> levels_;
  DepthHead depth_head_{nullptr};
};
TORCH_MODULE(Decoupling);

/// Mean squared error between a reconstruction and the original features.
torch::Tensor reconstruction_loss(const torch::Tensor& reconstruction, const torch::Tensor& original);

/// As reconstruction_loss, one value per batch element.
torch::Tensor reconstruction_loss_per_sample(const torch::Tensor& reconstruction,
                                             const torch::Tensor& original);

}  // namespace dsnet
