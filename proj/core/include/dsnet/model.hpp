#pragma once

#include <torch/torch.h>

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "dsnet/backbone.hpp"
#include "dsnet/core_types.hpp"
#include "dsnet/decoder.hpp"
#include "dsnet/decoupling.hpp"
#include "dsnet/fusion.hpp"

namespace dsnet {

struct ModelConfig {
  int64_t input_size = 256;
  NormKind norm = NormKind::group;
  EncoderSpec encoder;
  /// Common per-level width after a 1x1 projection; 0 keeps the encoder's native widths.
  int64_t level_width = 0;
  FusionOptions fusion;
  DecoderOptions decoder;
  /// Without the depth branch the RGB features are not decoupled and each
  /// level fuses them with the depth features through a DAM only.
  bool depth_branch = true;
  bool reconstruction = true;
};

/// Smallest input side the model accepts: level 3 must stay at least 3x3 for
/// its ASPP.
inline constexpr int64_t kMinInputSize = 64;

struct DdcnnOutput {
  PredictionPair prediction;
  FeaturePyramid rgb_features;
  FeaturePyramid depth_features;
  DecoupledFeatures decoupled;
  FusionOutputs fusion;
};

/// The depth-decoupling CNN: two encoders, the depth estimation branch, one
/// depth-induced fusion per level and the ASPP decoder.
class DdcnnImpl : public torch::nn::Module {
 public:
  explicit DdcnnImpl(const ModelConfig& config);

  /// rgb: B x 3 x S x S, depth: B x 1 x S x S with S divisible by 32 and at
  /// least kMinInputSize.
  DdcnnOutput forward(const torch::Tensor& rgb, const torch::Tensor& depth);

  /// Depth estimation branch only (RGB encoder, decoupling, depth head).
  torch::Tensor predict_depth(const torch::Tensor& rgb);

  /// RGB pyramid after the optional level projection.
  FeaturePyramid encode_rgb_features(const torch::Tensor& rgb);
  FeaturePyramid encode_depth_features(const torch::Tensor& depth);

  const ModelConfig& config() const { return config_; }
  std::array<int64_t, kPyramidLevels> level_channels() const { return level_channels_; }
  bool has_depth_branch() const { return config_.depth_branch; }

  Encoder& rgb_encoder() { return *rgb_encoder_; }
  Encoder& depth_encoder() { return *depth_encoder_; }
  Decoupling decoupling() { return decoupling_; }
  DimLevel fusion_level(int level) { return fusion_.at(level - 1); }
  Decoder decoder() { return decoder_; }

  /// Top-level submodule names that the depth pretraining stage trains.
  static const std::vector<std::string>& depth_branch_modules();

 private:
  void check_input(const torch::Tensor& rgb, int64_t channels, const char* what) const;
  FeaturePyramid project(FeaturePyramid pyramid, std::vector<torch::nn::Conv2d>& projections);

  ModelConfig config_;
  std::array<int64_t, kPyramidLevels> level_channels_{};
  std::shared_ptr<Encoder> rgb_encoder_;
  std::shared_ptr<Encoder> depth_encoder_;
  std::vector<torch::nn::Conv2d> rgb_projection_;
  std::vector<torch::nn::Conv2d> depth_projection_;
  Decoupling decoupling_{nullptr};
  std::vector<DimLevel> fusion_;
  std::vector<Dam> dam_only_;
  Decoder decoder_{nullptr};
};
TORCH_MODULE(Ddcnn);

/// Copies every parameter and buffer of `src` into `dst` by name. Throws
/// ShapeMismatch when the two models do not mirror each other.
void copy_state(torch::nn::Module& dst, const torch::nn::Module& src);

/// Copies the parameters and buffers of `src` whose names start with one of
/// `prefixes`. Returns the number of tensors copied.
size_t copy_state_with_prefix(torch::nn::Module& dst, const torch::nn::Module& src,
                              const std::vector<std::string>& prefixes);

/// A fresh model with the same configuration and identical state.
Ddcnn clone_model(const Ddcnn& model);

}  // namespace dsnet
