#pragma once

#include <torch/torch.h>

#include "dsnet/core_types.hpp"
#include "dsnet/layers.hpp"

namespace dsnet {

struct FusionOptions {
  /// Row-softmax over the HW x HW similarity matrix of the depth-gated module.
  bool dgm_softmax = true;
  /// Largest H*W the depth-gated module accepts.
  int64_t dgm_hw_cap = 4096;
  /// Output channels of the attention gate; 0 means one gate per feature channel.
  int64_t attention_channels = 0;
  // Ablation switches. Each replaces the named block by Concat -> Conv(1x1).
  bool no_dam = false;
  bool no_dgm = false;
  bool no_dim = false;
};

/// Depth-awareness module: channel and spatial attention computed from depth
/// features recalibrate the depth-dispelled RGB features,
///   F_dam = S_att(d) * (C_att(d) . r_s).
class DamImpl : public torch::nn::Module {
 public:
  explicit DamImpl(int64_t channels);

  torch::Tensor forward(const torch::Tensor& r_s, const torch::Tensor& d);

  /// Conv(3x3) then global average pooling: B x C x 1 x 1.
  torch::Tensor channel_attention(const torch::Tensor& d);
  /// Conv(3x3) to one map, softmax over all H*W positions, rescaled by H*W so
  /// the mean weight is 1: B x 1 x H x W.
  torch::Tensor spatial_attention(const torch::Tensor& d);

  /// spatial * (channel * r_s) with broadcasting over the singleton axes.
  static torch::Tensor apply(const torch::Tensor& r_s, const torch::Tensor& channel,
                             const torch::Tensor& spatial);

 private:
  torch::nn::Conv2d channel_conv_{nullptr};
  torch::nn::Conv2d spatial_conv_{nullptr};
};
TORCH_MODULE(Dam);

/// Depth-gated module: a non-local similarity built from the depth-aware RGB
/// features aggregates the encoder's depth features.
class DgmImpl : public torch::nn::Module {
 public:
  DgmImpl(int64_t channels, bool softmax, int64_t hw_cap);

  /// Throws ShapeMismatch on unequal inputs and SpatialTooLarge when H*W
  /// exceeds the configured cap.
  torch::Tensor forward(const torch::Tensor& r_d, const torch::Tensor& d);

  /// key (HW x C) times query (C x HW), optionally row-softmaxed: B x HW x HW.
  static torch::Tensor similarity(const torch::Tensor& query, const torch::Tensor& key, bool softmax);

  /// The non-local aggregation between projection and output convolutions:
  /// similarity(query, key) times value (HW x C), reshaped back to B x C x H x W.
  static torch::Tensor attend(const torch::Tensor& query, const torch::Tensor& key,
                              const torch::Tensor& value, bool softmax);

  torch::nn::Conv2d query_conv() { return query_; }
  torch::nn::Conv2d key_conv() { return key_; }
  torch::nn::Conv2d value_conv() { return value_; }
  torch::nn::Conv2d output_conv() { return output_; }
  bool softmax() const { return softmax_; }

 private:
  bool softmax_;
  int64_t hw_cap_;
  torch::nn::Conv2d query_{nullptr};
  torch::nn::Conv2d key_{nullptr};
  torch::nn::Conv2d value_{nullptr};
  torch::nn::Conv2d output_{nullptr};
};
TORCH_MODULE(Dgm);

/// sigmoid(Conv(3x3)(Concat(f_dgm, f_dam))).
class DimAttentionImpl : public torch::nn::Module {
 public:
  DimAttentionImpl(int64_t channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& f_dam, const torch::Tensor& f_dgm);
  torch::nn::Conv2d conv() { return conv_; }

 private:
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(DimAttention);

/// Concat of `inputs` same-shape maps followed by Conv(1x1) back to `channels`.
class ConcatFuseImpl : public torch::nn::Module {
 public:
  ConcatFuseImpl(int64_t channels, int64_t inputs);
  torch::Tensor forward(const std::vector<torch::Tensor>& xs);

 private:
  int64_t inputs_;
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(ConcatFuse);

struct DimOutputs {
  torch::Tensor fused;
  torch::Tensor attention;  // undefined without the attention gate
  torch::Tensor f_dam;
  torch::Tensor f_dgm;
  torch::Tensor f_d;
};

/// Depth-induced fusion at one pyramid level:
///   F = F_dam + F_dgm + A * d,  A = sigmoid(Conv(Concat(F_dgm, F_dam))).
class DimLevelImpl : public torch::nn::Module {
 public:
  DimLevelImpl(int64_t channels, const FusionOptions& options);

  /// Throws ShapeMismatch unless r_s, r_d and d share one shape.
  DimOutputs forward(const torch::Tensor& r_s, const torch::Tensor& r_d, const torch::Tensor& d);

  bool has_attention() const { return !attention_.is_empty(); }
  Dam dam() { return dam_; }
  Dgm dgm() { return dgm_; }
  DimAttention attention() { return attention_; }

 private:
  int64_t channels_;
  Dam dam_{nullptr};
  Dgm dgm_{nullptr};
  DimAttention attention_{nullptr};
  ConcatFuse dam_concat_{nullptr};
  ConcatFuse dgm_concat_{nullptr};
  ConcatFuse dim_concat_{nullptr};
};
TORCH_MODULE(DimLevel);

}  // namespace dsnet
