#include "dsnet/model.hpp"

namespace dsnet {

DdcnnImpl::DdcnnImpl(const ModelConfig& config) : config_(config) {
  rgb_encoder_ = register_module("rgb_encoder", make_encoder(config.encoder, config.norm));
  depth_encoder_ = register_module("depth_encoder", make_encoder(config.encoder, config.norm));

  const auto native = rgb_encoder_->channels();
  if (depth_encoder_->channels() != native) {
    throw ShapeMismatch("RGB and depth encoders disagree on level widths");
  }
  for (int i = 0; i < kPyramidLevels; ++i) {
    level_channels_[i] = config.level_width > 0 ? config.level_width : native[i];
  }
  if (config.level_width > 0) {
    for (int i = 0; i < kPyramidLevels; ++i) {
      const auto idx = std::to_string(i + 1);
      rgb_projection_.push_back(
          register_module("rgb_projection" + idx, conv1x1(native[i], config.level_width)));
      depth_projection_.push_back(
          register_module("depth_projection" + idx, conv1x1(native[i], config.level_width)));
    }
  }

  if (config.depth_branch) {
    decoupling_ = register_module("decoupling",
                                  Decoupling(level_channels_, config.norm, config.reconstruction));
    for (int i = 0; i < kPyramidLevels; ++i) {
      fusion_.push_back(register_module("fusion" + std::to_string(i + 1),
                                        DimLevel(level_channels_[i], config.fusion)));
    }
  } else {
    for (int i = 0; i < kPyramidLevels; ++i) {
      dam_only_.push_back(register_module("fusion" + std::to_string(i + 1), Dam(level_channels_[i])));
    }
  }
  decoder_ = register_module("decoder", Decoder(level_channels_, config.decoder));
}

const std::vector<std::string>& DdcnnImpl::depth_branch_modules() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n{"rgb_encoder", "decoupling"};
    for (int i = 1; i <= kPyramidLevels; ++i) n.push_back("rgb_projection" + std::to_string(i));
    return n;
  }();
  return names;
}

void DdcnnImpl::check_input(const torch::Tensor& x, int64_t channels, const char* what) const {
  if (x.dim() != 4 || x.size(1) != channels) {
    throw ShapeMismatch(std::string(what) + " must be B x " + std::to_string(channels) +
                        " x S x S, got " + shape_string(x.sizes()));
  }
  const auto h = x.size(2), w = x.size(3);
  if (h != w || h % 32 != 0 || h < kMinInputSize) {
    throw ShapeMismatch(std::string(what) + " side must be square, divisible by 32 and at least " +
                        std::to_string(kMinInputSize) + ", got " + shape_string(x.sizes()));
  }
}

FeaturePyramid DdcnnImpl::project(FeaturePyramid pyramid, std::vector<torch::nn::Conv2d>& projections) {
  if (!projections.empty()) {
    for (int i = 0; i < kPyramidLevels; ++i) {
      pyramid.levels[i] = projections[i]->forward(pyramid.levels[i]);
    }
  }
  return pyramid;
}

FeaturePyramid DdcnnImpl::encode_rgb_features(const torch::Tensor& rgb) {
  check_input(rgb, 3, "rgb");
  auto pyramid = project(encode_rgb(*rgb_encoder_, rgb), rgb_projection_);
  validate_pyramid(pyramid, rgb.size(2));
  return pyramid;
}

FeaturePyramid DdcnnImpl::encode_depth_features(const torch::Tensor& depth) {
  check_input(depth, 1, "depth");
  auto pyramid = project(encode_depth(*depth_encoder_, depth), depth_projection_);
  validate_pyramid(pyramid, depth.size(2));
  return pyramid;
}

torch::Tensor DdcnnImpl::predict_depth(const torch::Tensor& rgb) {
  if (!config_.depth_branch) throw Error("model was built without the depth branch");
  auto pyramid = encode_rgb_features(rgb);
  std::vector<torch::Tensor> aware;
  aware.reserve(kPyramidLevels);
  for (int i = 0; i < kPyramidLevels; ++i) {
    aware.push_back(decoupling_->level(i)->disentangle(pyramid.levels[i]).first);
  }
  return decoupling_->predict_depth(aware, rgb.size(2));
}

DdcnnOutput DdcnnImpl::forward(const torch::Tensor& rgb, const torch::Tensor& depth) {
  DdcnnOutput out;
  out.rgb_features = encode_rgb_features(rgb);
  out.depth_features = encode_depth_features(depth);
  if (rgb.size(0) != depth.size(0) || rgb.size(2) != depth.size(2)) {
    throw ShapeMismatch("rgb " + shape_string(rgb.sizes()) + " and depth " +
                        shape_string(depth.sizes()) + " disagree on batch or size");
  }
  const int64_t size = rgb.size(2);

  if (config_.depth_branch) {
    out.decoupled = decoupling_->forward(out.rgb_features);
    out.prediction.depth = decoupling_->predict_depth(out.decoupled.depth_aware, size);
    for (int i = 0; i < kPyramidLevels; ++i) {
      auto level = fusion_[i]->forward(out.decoupled.depth_dispelled[i], out.decoupled.depth_aware[i],
                                       out.depth_features.levels[i]);
      out.fusion.fused.push_back(level.fused);
      if (level.attention.defined()) {
        out.fusion.attention.push_back(level.attention);
        out.fusion.f_dam.push_back(level.f_dam);
        out.fusion.f_dgm.push_back(level.f_dgm);
        out.fusion.f_d.push_back(level.f_d);
      }
    }
  } else {
    for (int i = 0; i < kPyramidLevels; ++i) {
      out.fusion.fused.push_back(dam_only_[i]->forward(out.rgb_features.levels[i],
                                                       out.depth_features.levels[i]));
    }
  }
  out.prediction.saliency = decoder_->forward(out.fusion.fused, size);
  return out;
}

namespace {

void copy_named(torch::nn::Module& dst, const torch::nn::Module& src,
                const std::vector<std::string>* prefixes, size_t& copied) {
  auto matches = [&](const std::string& name) {
    if (!prefixes) return true;
    for (const auto& p : *prefixes) {
      if (name == p || name.rfind(p + ".", 0) == 0) return true;
    }
    return false;
  };
  torch::NoGradGuard no_grad;
  auto src_params = src.named_parameters(true);
  auto src_buffers = src.named_buffers(true);
  for (auto& item : dst.named_parameters(true)) {
    if (!matches(item.key())) continue;
    const auto* s = src_params.find(item.key());
    if (!s) throw ShapeMismatch("source model lacks parameter " + item.key());
    require_same_shape(item.value(), *s, item.key());
    item.value().copy_(*s);
    ++copied;
  }
  for (auto& item : dst.named_buffers(true)) {
    if (!matches(item.key())) continue;
    const auto* s = src_buffers.find(item.key());
    if (!s) throw ShapeMismatch("source model lacks buffer " + item.key());
    require_same_shape(item.value(), *s, item.key());
    item.value().copy_(*s);
    ++copied;
  }
}

}  // namespace

void copy_state(torch::nn::Module& dst, const torch::nn::Module& src) {
  size_t copied = 0;
  copy_named(dst, src, nullptr, copied);
}

size_t copy_state_with_prefix(torch::nn::Module& dst, const torch::nn::Module& src,
                              const std::vector<std::string>& prefixes) {
  size_t copied = 0;
  copy_named(dst, src, &prefixes, copied);
  return copied;
}

Ddcnn clone_model(const Ddcnn& model) {
  Ddcnn copy(model->config());
  const auto first = model->parameters().front();
  copy->to(first.device(), first.scalar_type());
  copy_state(*copy, *model);
  copy->train(model->is_training());
  return copy;
}

}  // namespace dsnet
