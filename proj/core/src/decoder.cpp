#include "dsnet/decoder.hpp"

namespace dsnet {

MergeMode parse_merge(std::string_view name) {
  if (name == "add") return MergeMode::add;
  if (name == "concat") return MergeMode::concat;
  throw ConfigError("unknown decoder.merge '" + std::string(name) + "' (expected add|concat)");
}

std::string_view to_string(MergeMode mode) { return mode == MergeMode::add ? "add" : "concat"; }

AsppImpl::AsppImpl(int64_t in_channels, const AsppSpec& spec) {
  if (spec.dilation_rates.empty()) throw ConfigError("ASPP needs at least one dilation rate");
  for (size_t i = 0; i < spec.dilation_rates.size(); ++i) {
    branches_.push_back(register_module(
        "branch" + std::to_string(i),
        conv3x3(in_channels, spec.out_channels, 1, spec.dilation_rates[i])));
  }
  project_ = register_module(
      "project",
      conv1x1(static_cast<int64_t>(spec.dilation_rates.size()) * spec.out_channels, spec.out_channels));
}

torch::Tensor AsppImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4) throw ShapeMismatch("ASPP input must be rank 4, got " + shape_string(x.sizes()));
  if (x.size(2) < 3 || x.size(3) < 3) {
    throw InputTooSmall("ASPP input " + shape_string(x.sizes()) + " is smaller than 3x3");
  }
  std::vector<torch::Tensor> outs;
  outs.reserve(branches_.size());
  for (auto& branch : branches_) outs.push_back(torch::relu(branch->forward(x)));
  return project_->forward(torch::cat(outs, 1));
}

DecoderImpl::DecoderImpl(std::array<int64_t, kPyramidLevels> level_channels,
                         const DecoderOptions& options)
    : options_(options) {
  const AsppSpec aspp_spec{options.aspp_rates, options.width};
  for (int i = 0; i < kPyramidLevels; ++i) {
    projections_.push_back(register_module("project" + std::to_string(i + 1),
                                           conv1x1(level_channels[i], options.width)));
  }
  for (int i = 0; i < kPyramidLevels - 1; ++i) {
    aspps_.push_back(register_module("aspp" + std::to_string(i + 1), Aspp(options.width, aspp_spec)));
    if (options.merge == MergeMode::concat) {
      merges_.push_back(register_module("merge" + std::to_string(i + 1),
                                        conv1x1(2 * options.width, options.width)));
    }
  }
  head_conv_ = register_module("head_conv", conv3x3(options.width, options.width));
  head_out_ = register_module("head_out", conv1x1(options.width, 1));
}

torch::Tensor DecoderImpl::merge_adjacent(int fine_level, const torch::Tensor& fine,
                                          const torch::Tensor& coarse) {
  if (fine.dim() != 4 || coarse.dim() != 4 || coarse.size(0) != fine.size(0) ||
      coarse.size(1) != fine.size(1) || coarse.size(2) * 2 != fine.size(2) ||
      coarse.size(3) * 2 != fine.size(3)) {
    throw ShapeMismatch("merge expects coarse at half the size of fine: fine " +
                            shape_string(fine.sizes()) + ", coarse " + shape_string(coarse.sizes()),
                        fine_level);
  }
  auto refined = aspps_.at(fine_level - 1)->forward(fine);
  auto upsampled = upsample_to(coarse, fine.size(2), fine.size(3));
  if (options_.merge == MergeMode::add) return refined + upsampled;
  return merges_.at(fine_level - 1)->forward(torch::cat({refined, upsampled}, 1));
}

torch::Tensor DecoderImpl::forward(const std::vector<torch::Tensor>& fused, int64_t target_size) {
  if (fused.size() != kPyramidLevels) {
    throw MissingLevel("decoder needs " + std::to_string(kPyramidLevels) + " levels, got " +
                       std::to_string(fused.size()));
  }
  auto merged = projections_[kPyramidLevels - 1]->forward(fused[kPyramidLevels - 1]);
  for (int level = kPyramidLevels - 1; level >= 1; --level) {
    auto fine = projections_[level - 1]->forward(fused[level - 1]);
    merged = merge_adjacent(level, fine, merged);
  }
  auto logits = head_out_->forward(torch::relu(head_conv_->forward(merged)));
  return torch::sigmoid(upsample_to(logits, target_size, target_size));
}

}  // namespace dsnet
