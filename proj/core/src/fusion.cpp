#include "dsnet/fusion.hpp"

namespace dsnet {

DamImpl::DamImpl(int64_t channels) {
  channel_conv_ = register_module("channel_conv", conv3x3(channels, channels));
  spatial_conv_ = register_module("spatial_conv", conv3x3(channels, 1));
}

torch::Tensor DamImpl::channel_attention(const torch::Tensor& d) {
  return channel_conv_->forward(d).mean({2, 3}, /*keepdim=*/true);
}

torch::Tensor DamImpl::spatial_attention(const torch::Tensor& d) {
  auto logits = spatial_conv_->forward(d);
  const auto b = logits.size(0), h = logits.size(2), w = logits.size(3);
  auto weights = torch::softmax(logits.view({b, h * w}), 1) * static_cast<double>(h * w);
  return weights.view({b, 1, h, w});
}

torch::Tensor DamImpl::apply(const torch::Tensor& r_s, const torch::Tensor& channel,
                             const torch::Tensor& spatial) {
  return spatial * (channel * r_s);
}

torch::Tensor DamImpl::forward(const torch::Tensor& r_s, const torch::Tensor& d) {
  require_same_shape(r_s, d, "DAM inputs");
  return apply(r_s, channel_attention(d), spatial_attention(d));
}

DgmImpl::DgmImpl(int64_t channels, bool softmax, int64_t hw_cap)
    : softmax_(softmax), hw_cap_(hw_cap) {
  query_ = register_module("query", conv3x3(channels, channels));
  key_ = register_module("key", conv3x3(channels, channels));
  value_ = register_module("value", conv3x3(channels, channels));
  output_ = register_module("output", conv3x3(channels, channels));
}

torch::Tensor DgmImpl::similarity(const torch::Tensor& query, const torch::Tensor& key, bool softmax) {
  const auto b = query.size(0), c = query.size(1), hw = query.size(2) * query.size(3);
  auto q = query.reshape({b, c, hw});                  // C x HW
  auto k = key.reshape({b, c, hw}).transpose(1, 2);    // HW x C
  auto sim = torch::bmm(k, q);                         // HW x HW
  return softmax ? torch::softmax(sim, -1) : sim;
}

torch::Tensor DgmImpl::attend(const torch::Tensor& query, const torch::Tensor& key,
                              const torch::Tensor& value, bool softmax) {
  const auto b = value.size(0), c = value.size(1), h = value.size(2), w = value.size(3);
  auto v = value.reshape({b, c, h * w}).transpose(1, 2);  // HW x C
  auto out = torch::bmm(similarity(query, key, softmax), v);
  return out.transpose(1, 2).reshape({b, c, h, w});
}

torch::Tensor DgmImpl::forward(const torch::Tensor& r_d, const torch::Tensor& d) {
  require_same_shape(r_d, d, "DGM inputs");
  const auto hw = r_d.size(2) * r_d.size(3);
  if (hw > hw_cap_) {
    throw SpatialTooLarge("DGM spatial size " + std::to_string(hw) + " exceeds cap " +
                          std::to_string(hw_cap_));
  }
  auto aggregated = attend(query_->forward(r_d), key_->forward(r_d), value_->forward(d), softmax_);
  return output_->forward(aggregated);
}

DimAttentionImpl::DimAttentionImpl(int64_t channels, int64_t out_channels) {
  conv_ = register_module("conv", conv3x3(2 * channels, out_channels));
}

torch::Tensor DimAttentionImpl::forward(const torch::Tensor& f_dam, const torch::Tensor& f_dgm) {
  require_same_shape(f_dam, f_dgm, "DIM attention inputs");
  return torch::sigmoid(conv_->forward(torch::cat({f_dgm, f_dam}, 1)));
}

ConcatFuseImpl::ConcatFuseImpl(int64_t channels, int64_t inputs) : inputs_(inputs) {
  conv_ = register_module("conv", conv1x1(inputs * channels, channels));
}

torch::Tensor ConcatFuseImpl::forward(const std::vector<torch::Tensor>& xs) {
  if (static_cast<int64_t>(xs.size()) != inputs_) {
    throw ShapeMismatch("concat fusion expects " + std::to_string(inputs_) + " inputs");
  }
  for (size_t i = 1; i < xs.size(); ++i) require_same_shape(xs[0], xs[i], "concat fusion inputs");
  return conv_->forward(torch::cat(xs, 1));
}

DimLevelImpl::DimLevelImpl(int64_t channels, const FusionOptions& options) : channels_(channels) {
  if (options.no_dim) {
    dim_concat_ = register_module("dim_concat", ConcatFuse(channels, 3));
    return;
  }
  if (options.no_dam) {
    dam_concat_ = register_module("dam_concat", ConcatFuse(channels, 2));
  } else {
    dam_ = register_module("dam", Dam(channels));
  }
  if (options.no_dgm) {
    dgm_concat_ = register_module("dgm_concat", ConcatFuse(channels, 2));
  } else {
    dgm_ = register_module("dgm", Dgm(channels, options.dgm_softmax, options.dgm_hw_cap));
  }
  const int64_t gate = options.attention_channels > 0 ? options.attention_channels : channels;
  if (gate != 1 && gate != channels) {
    throw ConfigError("attention_channels must be 1 or the level width");
  }
  attention_ = register_module("attention", DimAttention(channels, gate));
}

DimOutputs DimLevelImpl::forward(const torch::Tensor& r_s, const torch::Tensor& r_d,
                                 const torch::Tensor& d) {
  require_same_shape(r_s, d, "DIM inputs (r_s, d)");
  require_same_shape(r_d, d, "DIM inputs (r_d, d)");
  if (d.dim() != 4 || d.size(1) != channels_) {
    throw ShapeMismatch("DIM expects " + std::to_string(channels_) + " channels, got " +
                        shape_string(d.sizes()));
  }
  DimOutputs out;
  if (!dim_concat_.is_empty()) {
    out.fused = dim_concat_->forward({r_s, r_d, d});
    return out;
  }
  out.f_dam = dam_.is_empty() ? dam_concat_->forward({r_s, d}) : dam_->forward(r_s, d);
  out.f_dgm = dgm_.is_empty() ? dgm_concat_->forward({r_d, d}) : dgm_->forward(r_d, d);
  out.attention = attention_->forward(out.f_dam, out.f_dgm);
  out.f_d = out.attention * d;
  out.fused = out.f_dam + out.f_dgm + out.f_d;
#ifndef NDEBUG
  TORCH_CHECK(torch::equal(out.fused, out.f_dam + out.f_dgm + out.f_d), "DIM additivity violated");
#endif
  return out;
}

}  // namespace dsnet
