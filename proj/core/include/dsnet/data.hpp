#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dsnet/core_types.hpp"

namespace dsnet {

namespace fs = std::filesystem;

enum class DatasetKind { labeled_rgbd, unlabeled_rgb, unlabeled_rgb_with_pseudo_depth };

struct SampleEntry {
  std::string stem;
  fs::path rgb;
  std::optional<fs::path> depth;
  std::optional<fs::path> gt;
};

/// Samples under `root/rgb`, `root/depth` and `root/gt`, paired by file stem
/// and sorted lexicographically.
struct DatasetIndex {
  fs::path root;
  DatasetKind kind = DatasetKind::labeled_rgbd;
  std::vector<SampleEntry> samples;
};

/// Throws MissingSubdir when a subdirectory required by `kind` is absent and
/// StemMismatch listing every stem present in one required subdirectory but
/// not another. Unlabeled kinds ignore `gt/` (and `depth/` for plain RGB).
DatasetIndex scan_dataset(const fs::path& root, DatasetKind kind);

/// Image files directly under `dir`, sorted, keyed by stem.
std::vector<fs::path> list_images(const fs::path& dir);

struct Sample {
  std::string stem;
  ImagePlane rgb;
  std::optional<ImagePlane> depth;
  std::optional<ImagePlane> gt;
};

/// 8-bit colour image as 3 x H x W in [0,1]. Throws UnreadableImage.
ImagePlane read_rgb(const fs::path& path);
/// 8- or 16-bit grayscale depth, min-max normalized per image (a constant
/// image becomes all zeros). Throws UnreadableImage or UnsupportedBitDepth.
ImagePlane read_depth(const fs::path& path);
/// Grayscale mask binarized at 0.5. Throws UnreadableImage.
ImagePlane read_mask(const fs::path& path);
/// Grayscale image scaled to [0,1] without further normalization (predictions).
ImagePlane read_gray(const fs::path& path);

/// Writes a 1 x H x W plane as 16-bit grayscale, values scaled by 65535.
void write_depth16(const fs::path& path, const torch::Tensor& plane);
/// Writes a 1 x H x W plane as 8-bit grayscale, values scaled by 255.
void write_gray8(const fs::path& path, const torch::Tensor& plane);
/// Writes a 3 x H x W plane as an 8-bit colour image.
void write_rgb8(const fs::path& path, const torch::Tensor& plane);

Sample load_sample(const SampleEntry& entry);
std::vector<Sample> load_dataset(const DatasetIndex& index);

struct AugmentOptions {
  double flip_prob = 0.5;
  double max_rotation_deg = 10.0;
  int64_t size = 256;
};

/// Rotation about the centre (reflect padding), resize to options.size, then a
/// horizontal flip, all applied identically to every plane present. Masks use
/// nearest-neighbour resampling, RGB and depth bilinear. Deterministic in `seed`.
Sample augment(const Sample& sample, uint64_t seed, const AugmentOptions& options);

/// Resizes every plane of `sample` to size x size without any random transform.
Sample resize_sample(const Sample& sample, int64_t size);

/// Resizes a C x H x W plane bilinearly (nearest for masks).
ImagePlane resize_plane(const ImagePlane& plane, int64_t height, int64_t width);

/// Mirrors a C x H x W tensor along its width.
torch::Tensor hflip(const torch::Tensor& plane);

struct ToyCounts {
  int64_t labeled = 0;
  int64_t unlabeled = 0;
  int64_t test = 0;
};

/// Synthetic RGB-D scenes of 2-4 layered shapes over a textured background.
/// Depth is constant per layer with nearer layers brighter; the ground truth
/// is the nearest shape. Writes `labeled/{rgb,depth,gt}`, `unlabeled/rgb` and,
/// when n_test > 0, `test/{rgb,depth,gt}` under `out_dir`. Files are
/// bitwise-identical for a fixed seed. Throws IoError.
ToyCounts make_toy_data(const fs::path& out_dir, int64_t n_labeled, int64_t n_unlabeled,
                        uint64_t seed, int64_t size = 64, int64_t n_test = 0);

/// Cycles over `n` indices in a fresh random order every epoch.
class PoolSampler {
 public:
  PoolSampler(size_t n, uint64_t seed);

  /// The next `k` indices, crossing epoch boundaries as needed.
  std::vector<size_t> next(size_t k);

  size_t epoch() const { return epoch_; }

 private:
  void reshuffle();

  std::vector<size_t> order_;
  size_t cursor_ = 0;
  size_t epoch_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace dsnet
