#pragma once

#include <torch/torch.h>

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "dsnet/errors.hpp"

namespace dsnet {

inline constexpr int kPyramidLevels = 4;

enum class PlaneKind { rgb, depth, saliency, mask };

std::string_view to_string(PlaneKind kind);

/// Channel count required by a plane kind: 3 for rgb, 1 otherwise.
int64_t expected_channels(PlaneKind kind);

/// A single C x H x W image with value-range semantics. Every plane handed out
/// by the library has been checked against the invariants of its kind.
class ImagePlane {
 public:
  ImagePlane() = default;

  /// Validates `data` against `kind` and wraps it. Throws ShapeMismatch on a
  /// wrong rank or channel count, OutOfRange when values leave [0,1] or a mask
  /// holds anything but 0 and 1.
  static ImagePlane make(torch::Tensor data, PlaneKind kind);

  const torch::Tensor& data() const noexcept { return data_; }
  PlaneKind kind() const noexcept { return kind_; }
  int64_t channels() const { return data_.size(0); }
  int64_t height() const { return data_.size(1); }
  int64_t width() const { return data_.size(2); }

 private:
  ImagePlane(torch::Tensor data, PlaneKind kind) : data_(std::move(data)), kind_(kind) {}

  torch::Tensor data_;
  PlaneKind kind_ = PlaneKind::rgb;
};

enum class PyramidSource { rgb_encoder, depth_encoder };

/// Four B x C_i x H_i x W_i feature maps, finest first.
struct FeaturePyramid {
  std::vector<torch::Tensor> levels;
  PyramidSource source = PyramidSource::rgb_encoder;
};

/// Spatial size of pyramid level `level` (1-based) for a square input.
constexpr int64_t level_size(int64_t input_size, int level) {
  return input_size >> (level + 1);
}

/// Checks level count, per-level spatial scale (input / 2^(i+1)) and a shared
/// batch dimension. Throws ShapeMismatch naming the offending level.
void validate_pyramid(const FeaturePyramid& pyramid, int64_t input_size);

/// Per-level output of the decoupling stage.
struct DecoupledFeatures {
  std::vector<torch::Tensor> depth_aware;
  std::vector<torch::Tensor> depth_dispelled;
  std::vector<torch::Tensor> reconstruction;
};

/// Per-level intermediates of the depth-induced fusion. `attention` is empty
/// when the model was built without the attention gate.
struct FusionOutputs {
  std::vector<torch::Tensor> f_dam;
  std::vector<torch::Tensor> f_dgm;
  std::vector<torch::Tensor> f_d;
  std::vector<torch::Tensor> fused;
  std::vector<torch::Tensor> attention;
};

/// Batched saliency and depth predictions at input resolution, B x 1 x H x W.
/// `depth` is undefined for models without the depth branch.
struct PredictionPair {
  torch::Tensor saliency;
  torch::Tensor depth;
};

std::string shape_string(at::IntArrayRef sizes);

/// Throws ShapeMismatch unless `a` and `b` have identical sizes.
void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, std::string_view what);

}  // namespace dsnet
