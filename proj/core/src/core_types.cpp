#include "dsnet/core_types.hpp"

#include <sstream>

namespace dsnet {

StemMismatch::StemMismatch(std::vector<std::string> stems)
    : Error([&] {
        std::string msg = "stem mismatch:";
        for (const auto& s : stems) msg += " " + s;
        return msg;
      }()),
      stems_(std::move(stems)) {}

std::string_view to_string(PlaneKind kind) {
  switch (kind) {
    case PlaneKind::rgb: return "rgb";
    case PlaneKind::depth: return "depth";
    case PlaneKind::saliency: return "saliency";
    case PlaneKind::mask: return "mask";
  }
  return "unknown";
}

int64_t expected_channels(PlaneKind kind) { return kind == PlaneKind::rgb ? 3 : 1; }

std::string shape_string(at::IntArrayRef sizes) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < sizes.size(); ++i) os << (i ? "," : "") << sizes[i];
  os << ")";
  return os.str();
}

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, std::string_view what) {
  if (a.sizes() != b.sizes()) {
    throw ShapeMismatch(std::string(what) + ": " + shape_string(a.sizes()) + " vs " +
                        shape_string(b.sizes()));
  }
}

ImagePlane ImagePlane::make(torch::Tensor data, PlaneKind kind) {
  if (data.dim() != 3) {
    throw ShapeMismatch(std::string(to_string(kind)) + " plane must be C x H x W, got " +
                        shape_string(data.sizes()));
  }
  if (data.size(0) != expected_channels(kind)) {
    throw ShapeMismatch(std::string(to_string(kind)) + " plane expects " +
                        std::to_string(expected_channels(kind)) + " channels, got " +
                        std::to_string(data.size(0)));
  }
  if (data.numel() > 0) {
    const double lo = data.min().item<double>();
    const double hi = data.max().item<double>();
    if (lo < 0.0 || hi > 1.0 || std::isnan(lo) || std::isnan(hi)) {
      throw OutOfRange(std::string(to_string(kind)) + " plane values outside [0,1]");
    }
    if (kind == PlaneKind::mask && !data.eq(0).logical_or(data.eq(1)).all().item<bool>()) {
      throw OutOfRange("mask plane holds values other than 0 and 1");
    }
  }
  return ImagePlane(std::move(data), kind);
}

void validate_pyramid(const FeaturePyramid& pyramid, int64_t input_size) {
  if (pyramid.levels.size() != kPyramidLevels) {
    throw ShapeMismatch("pyramid has " + std::to_string(pyramid.levels.size()) +
                        " levels, expected " + std::to_string(kPyramidLevels));
  }
  const int64_t batch = pyramid.levels.front().size(0);
  for (int i = 0; i < kPyramidLevels; ++i) {
    const auto& t = pyramid.levels[i];
    const int level = i + 1;
    if (t.dim() != 4) {
      throw ShapeMismatch("level " + std::to_string(level) + " must be rank 4, got " +
                              shape_string(t.sizes()),
                          level);
    }
    const int64_t want = level_size(input_size, level);
    if (t.size(0) != batch || t.size(2) != want || t.size(3) != want) {
      throw ShapeMismatch("level " + std::to_string(level) + ": expected (" +
                              std::to_string(batch) + ",C," + std::to_string(want) + "," +
                              std::to_string(want) + "), got " + shape_string(t.sizes()),
                          level);
    }
  }
}

}  // namespace dsnet
