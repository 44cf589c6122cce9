#include "dsnet/backbone.hpp"

#include <filesystem>
#include <map>
#include <mutex>

namespace dsnet {

TinyEncoder::TinyEncoder(std::array<int64_t, kPyramidLevels> channels, NormKind norm)
    : channels_(channels) {
  stem_ = torch::nn::Sequential(conv3x3(3, channels[0], 2));
  stem_->push_back(make_norm(channels[0], norm));
  stem_->push_back(torch::nn::ReLU());
  register_module("stem", stem_);
  int64_t in = channels[0];
  for (int i = 0; i < kPyramidLevels; ++i) {
    const int64_t c = channels[i];
    torch::nn::Sequential stage(conv3x3(in, c));
    stage->push_back(make_norm(c, norm));
    stage->push_back(torch::nn::ReLU());
    stage->push_back(conv3x3(c, c, 2));
    stages_.push_back(register_module("stage" + std::to_string(i + 1), stage));
    in = c;
  }
}

std::vector<torch::Tensor> TinyEncoder::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> levels;
  levels.reserve(kPyramidLevels);
  auto h = stem_->forward(x);
  for (auto& stage : stages_) {
    h = stage->forward(h);
    levels.push_back(h);
  }
  return levels;
}

namespace {

struct Registry {
  std::mutex mutex;
  std::map<std::string, EncoderFactory> factories;
};

Registry& registry() {
  static Registry r{{}, {{"tiny", [](const EncoderSpec& spec, NormKind norm) -> std::shared_ptr<Encoder> {
                          return std::make_shared<TinyEncoder>(spec.channels_per_level, norm);
                        }}}};
  return r;
}

}  // namespace

void register_encoder(const std::string& name, EncoderFactory factory) {
  auto& reg = registry();
  std::lock_guard lock(reg.mutex);
  reg.factories[name] = std::move(factory);
}

std::shared_ptr<Encoder> make_encoder(const EncoderSpec& spec, NormKind norm) {
  for (auto c : spec.channels_per_level) {
    if (c <= 0) throw ConfigError("encoder channels must be positive");
  }
  EncoderFactory factory;
  {
    auto& reg = registry();
    std::lock_guard lock(reg.mutex);
    auto it = reg.factories.find(spec.name);
    if (it == reg.factories.end()) throw UnknownEncoder(spec.name);
    factory = it->second;
  }
  auto encoder = factory(spec, norm);
  if (spec.pretrained) {
    if (!std::filesystem::exists(spec.weights_path)) {
      throw MissingCheckpoint("pretrained encoder weights not found: " + spec.weights_path);
    }
    torch::serialize::InputArchive archive;
    archive.load_from(spec.weights_path);
    encoder->load(archive);
  }
  return encoder;
}

namespace {

FeaturePyramid run_encoder(Encoder& encoder, const torch::Tensor& x, PyramidSource source) {
  if (x.dim() != 4) {
    throw ShapeMismatch("encoder input must be B x C x H x W, got " + shape_string(x.sizes()));
  }
  FeaturePyramid pyramid{encoder.forward(x), source};
  if (pyramid.levels.size() != kPyramidLevels) {
    throw ShapeMismatch("encoder returned " + std::to_string(pyramid.levels.size()) + " levels");
  }
  return pyramid;
}

}  // namespace

FeaturePyramid encode_rgb(Encoder& encoder, const torch::Tensor& rgb) {
  if (rgb.dim() != 4 || rgb.size(1) != 3) {
    throw ShapeMismatch("rgb batch must be B x 3 x H x W, got " + shape_string(rgb.sizes()));
  }
  return run_encoder(encoder, rgb, PyramidSource::rgb_encoder);
}

FeaturePyramid encode_depth(Encoder& encoder, const torch::Tensor& depth) {
  if (depth.dim() != 4 || depth.size(1) != 1) {
    throw ShapeMismatch("depth batch must be B x 1 x H x W, got " + shape_string(depth.sizes()));
  }
  auto input = encoder.in_channels() == 1 ? depth : depth.expand({-1, encoder.in_channels(), -1, -1});
  return run_encoder(encoder, input, PyramidSource::depth_encoder);
}

}  // namespace dsnet
