#include "dsnet/decoupling.hpp"

namespace dsnet {

DecouplerImpl::DecouplerImpl(int64_t channels, NormKind norm, bool with_reconstruction)
    : channels_(channels) {
  depth_head_ = register_module("depth_aware", conv_block(channels, channels, norm));
  saliency_head_ = register_module("depth_dispelled", conv_block(channels, channels, norm));
  if (with_reconstruction) {
    reconstruct_ = register_module("reconstruct", conv_block(2 * channels, channels, norm));
  }
}

std::pair<torch::Tensor, torch::Tensor> DecouplerImpl::disentangle(const torch::Tensor& r) {
  if (r.dim() != 4 || r.size(1) != channels_) {
    throw ShapeMismatch("decoupler expects B x " + std::to_string(channels_) +
                        " x H x W, got " + shape_string(r.sizes()));
  }
  return {depth_head_->forward(r), saliency_head_->forward(r)};
}

torch::Tensor DecouplerImpl::reconstruct(const torch::Tensor& depth_aware,
                                         const torch::Tensor& depth_dispelled) {
  require_same_shape(depth_aware, depth_dispelled, "reconstruct");
  if (depth_aware.dim() != 4 || depth_aware.size(1) != channels_) {
    throw ShapeMismatch("reconstruct expects " + std::to_string(channels_) + " channels, got " +
                        shape_string(depth_aware.sizes()));
  }
  if (reconstruct_.is_empty()) {
    throw Error("decoupler was built without a reconstruction block");
  }
  return reconstruct_->forward(torch::cat({depth_aware, depth_dispelled}, 1));
}

DepthHeadImpl::DepthHeadImpl(std::array<int64_t, kPyramidLevels> channels) {
  int64_t total = 0;
  for (auto c : channels) total += c;
  fuse_ = register_module("fuse", conv3x3(total, channels[0]));
  project_ = register_module("project", conv1x1(channels[0], 1));
}

torch::Tensor DepthHeadImpl::forward(const std::vector<torch::Tensor>& depth_aware,
                                     int64_t target_size) {
  if (depth_aware.size() != kPyramidLevels) {
    throw MissingLevel("depth head needs " + std::to_string(kPyramidLevels) + " levels, got " +
                       std::to_string(depth_aware.size()));
  }
  const auto& first = depth_aware.front();
  std::vector<torch::Tensor> stack;
  stack.reserve(depth_aware.size());
  for (const auto& level : depth_aware) stack.push_back(upsample_to(level, first.size(2), first.size(3)));
  auto logits = project_->forward(fuse_->forward(torch::cat(stack, 1)));
  return torch::sigmoid(upsample_to(logits, target_size, target_size));
}

DecouplingImpl::DecouplingImpl(std::array<int64_t, kPyramidLevels> channels, NormKind norm,
                               bool with_reconstruction) {
  for (int i = 0; i < kPyramidLevels; ++i) {
    levels_.push_back(register_module("level" + std::to_string(i + 1),
                                      Decoupler(channels[i], norm, with_reconstruction)));
  }
  depth_head_ = register_module("depth_head", DepthHead(channels));
}

DecoupledFeatures DecouplingImpl::forward(const FeaturePyramid& rgb) {
  if (rgb.levels.size() != kPyramidLevels) {
    throw MissingLevel("decoupling needs " + std::to_string(kPyramidLevels) + " levels");
  }
  DecoupledFeatures out;
  for (int i = 0; i < kPyramidLevels; ++i) {
    auto [aware, dispelled] = levels_[i]->disentangle(rgb.levels[i]);
    if (levels_[i]->has_reconstruction()) {
      out.reconstruction.push_back(levels_[i]->reconstruct(aware, dispelled));
    }
    out.depth_aware.push_back(std::move(aware));
    out.depth_dispelled.push_back(std::move(dispelled));
  }
  return out;
}

torch::Tensor reconstruction_loss(const torch::Tensor& reconstruction, const torch::Tensor& original) {
  require_same_shape(reconstruction, original, "reconstruction_loss");
  return (reconstruction - original).pow(2).mean();
}

torch::Tensor reconstruction_loss_per_sample(const torch::Tensor& reconstruction,
                                             const torch::Tensor& original) {
  require_same_shape(reconstruction, original, "reconstruction_loss");
  return per_sample_mean((reconstruction - original).pow(2));
}

}  // namespace dsnet
