#pragma once

#include <torch/torch.h>

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dsnet/core_types.hpp"
#include "dsnet/layers.hpp"

namespace dsnet {

struct EncoderSpec {
  std::string name = "tiny";
  std::array<int64_t, kPyramidLevels> channels_per_level{16, 32, 64, 128};
  bool pretrained = false;
  /// Serialized encoder parameters, read when `pretrained` is set.
  std::string weights_path;
};

/// A feature extractor producing four maps at strides 4, 8, 16 and 32.
/// Pretrained backbones plug in by deriving from this class and registering a
/// factory under a name.
class Encoder : public torch::nn::Module {
 public:
  virtual std::vector<torch::Tensor> forward(const torch::Tensor& x) = 0;
  virtual int64_t in_channels() const = 0;
  virtual std::array<int64_t, kPyramidLevels> channels() const = 0;
};

/// Stride-2 stem followed by four stages of
/// conv3x3 -> norm -> ReLU -> conv3x3(stride 2).
class TinyEncoder : public Encoder {
 public:
  TinyEncoder(std::array<int64_t, kPyramidLevels> channels, NormKind norm);

  std::vector<torch::Tensor> forward(const torch::Tensor& x) override;
  int64_t in_channels() const override { return 3; }
  std::array<int64_t, kPyramidLevels> channels() const override { return channels_; }

 private:
  std::array<int64_t, kPyramidLevels> channels_;
  torch::nn::Sequential stem_{nullptr};
  std::vector<torch::nn::Sequential> stages_;
};

using EncoderFactory = std::function<std::shared_ptr<Encoder>(const EncoderSpec&, NormKind)>;

/// Adds or replaces a named encoder in the process-wide registry.
void register_encoder(const std::string& name, EncoderFactory factory);

/// Builds the encoder registered under `spec.name` and, for pretrained specs,
/// loads its weights. Throws UnknownEncoder on a registry miss.
std::shared_ptr<Encoder> make_encoder(const EncoderSpec& spec, NormKind norm);

/// Runs an RGB batch (B x 3 x H x W) through `encoder`.
FeaturePyramid encode_rgb(Encoder& encoder, const torch::Tensor& rgb);

/// Runs a depth batch (B x 1 x H x W) through `encoder`, replicating the
/// single channel when the encoder expects three.
FeaturePyramid encode_depth(Encoder& encoder, const torch::Tensor& depth);

}  // namespace dsnet
