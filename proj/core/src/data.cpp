#include "dsnet/data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <numeric>
#include <set>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace dsnet {

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  static const std::set<std::string> known{".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"};
  return known.count(ext) > 0;
}

std::map<std::string, fs::path> stems_of(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& p : list_images(dir)) out.emplace(p.stem().string(), p);
  return out;
}

fs::path require_dir(const fs::path& root, const char* name) {
  auto dir = root / name;
  if (!fs::is_directory(dir)) throw MissingSubdir("missing subdirectory " + dir.string());
  return dir;
}

// H x W x C float matrix from a C x H x W tensor.
cv::Mat to_mat(const torch::Tensor& plane) {
  auto hwc = plane.detach().to(torch::kCPU, torch::kFloat32).permute({1, 2, 0}).contiguous();
  const int h = static_cast<int>(hwc.size(0));
  const int w = static_cast<int>(hwc.size(1));
  const int c = static_cast<int>(hwc.size(2));
  cv::Mat m(h, w, CV_32FC(c), hwc.data_ptr<float>());
  return m.clone();
}

torch::Tensor from_mat(const cv::Mat& mat) {
  cv::Mat m;
  mat.convertTo(m, CV_32F);
  if (!m.isContinuous()) m = m.clone();
  auto t = torch::from_blob(m.data, {m.rows, m.cols, m.channels()}, torch::kFloat32).clone();
  return t.permute({2, 0, 1}).contiguous();
}

cv::Mat read_or_throw(const fs::path& path, int flags) {
  cv::Mat m;
  try {
    m = cv::imread(path.string(), flags);
  } catch (const cv::Exception&) {
    throw UnreadableImage(path.string());
  }
  if (m.empty()) throw UnreadableImage(path.string());
  return m;
}

void write_or_throw(const fs::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

cv::Mat single_channel(const torch::Tensor& plane) {
  if (plane.dim() != 3 || plane.size(0) != 1) {
    throw ShapeMismatch("expected a 1 x H x W plane, got " + shape_string(plane.sizes()));
  }
  return to_mat(plane.clamp(0.0, 1.0));
}

}  // namespace

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

DatasetIndex scan_dataset(const fs::path& root, DatasetKind kind) {
  if (!fs::is_directory(root)) throw MissingSubdir("dataset root does not exist: " + root.string());
  DatasetIndex index{root, kind, {}};
  auto rgb = stems_of(require_dir(root, "rgb"));
  std::vector<std::map<std::string, fs::path>> others;
  if (kind != DatasetKind::unlabeled_rgb) others.push_back(stems_of(require_dir(root, "depth")));
  if (kind == DatasetKind::labeled_rgbd) others.push_back(stems_of(require_dir(root, "gt")));

  std::set<std::string> all;
  for (const auto& [stem, _] : rgb) all.insert(stem);
  for (const auto& m : others) {
    for (const auto& [stem, _] : m) all.insert(stem);
  }
  std::vector<std::string> orphans;
  for (const auto& stem : all) {
    bool complete = rgb.count(stem) > 0;
    for (const auto& m : others) complete = complete && m.count(stem) > 0;
    if (!complete) orphans.push_back(stem);
  }
  if (!orphans.empty()) throw StemMismatch(orphans);

  for (const auto& [stem, path] : rgb) {
    SampleEntry entry{stem, path, std::nullopt, std::nullopt};
    if (!others.empty()) entry.depth = others[0].at(stem);
    if (others.size() > 1) entry.gt = others[1].at(stem);
    index.samples.push_back(std::move(entry));
  }
  return index;
}

ImagePlane read_rgb(const fs::path& path) {
  cv::Mat bgr = read_or_throw(path, cv::IMREAD_COLOR);
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return ImagePlane::make(from_mat(rgb).div_(255.0).clamp_(0.0, 1.0), PlaneKind::rgb);
}

ImagePlane read_depth(const fs::path& path) {
  cv::Mat m = read_or_throw(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (m.depth() != CV_8U && m.depth() != CV_16U) {
    throw UnsupportedBitDepth("depth image " + path.string() + " is neither 8- nor 16-bit");
  }
  auto t = from_mat(m);
  const float lo = t.min().item<float>();
  const float hi = t.max().item<float>();
  if (hi > lo) {
    t = ((t - lo) / (hi - lo)).clamp_(0.0, 1.0);
  } else {
    t.zero_();
  }
  return ImagePlane::make(t, PlaneKind::depth);
}

ImagePlane read_mask(const fs::path& path) {
  cv::Mat m = read_or_throw(path, cv::IMREAD_GRAYSCALE);
  auto t = from_mat(m).gt(127.5).to(torch::kFloat32);
  return ImagePlane::make(t, PlaneKind::mask);
}

ImagePlane read_gray(const fs::path& path) {
  cv::Mat m = read_or_throw(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  double scale = 0.0;
  if (m.depth() == CV_8U) {
    scale = 255.0;
  } else if (m.depth() == CV_16U) {
    scale = 65535.0;
  } else {
    throw UnsupportedBitDepth("image " + path.string() + " is neither 8- nor 16-bit");
  }
  return ImagePlane::make(from_mat(m).div_(scale).clamp_(0.0, 1.0), PlaneKind::saliency);
}

void write_depth16(const fs::path& path, const torch::Tensor& plane) {
  cv::Mat out;
  single_channel(plane).convertTo(out, CV_16U, 65535.0);
  write_or_throw(path, out);
}

void write_gray8(const fs::path& path, const torch::Tensor& plane) {
  cv::Mat out;
  single_channel(plane).convertTo(out, CV_8U, 255.0);
  write_or_throw(path, out);
}

void write_rgb8(const fs::path& path, const torch::Tensor& plane) {
  if (plane.dim() != 3 || plane.size(0) != 3) {
    throw ShapeMismatch("expected a 3 x H x W plane, got " + shape_string(plane.sizes()));
  }
  cv::Mat bgr, out;
  cv::cvtColor(to_mat(plane.clamp(0.0, 1.0)), bgr, cv::COLOR_RGB2BGR);
  bgr.convertTo(out, CV_8U, 255.0);
  write_or_throw(path, out);
}

Sample load_sample(const SampleEntry& entry) {
  Sample s{entry.stem, read_rgb(entry.rgb), std::nullopt, std::nullopt};
  if (entry.depth) s.depth = read_depth(*entry.depth);
  if (entry.gt) s.gt = read_mask(*entry.gt);
  return s;
}

std::vector<Sample> load_dataset(const DatasetIndex& index) {
  std::vector<Sample> out;
  out.reserve(index.samples.size());
  for (const auto& e : index.samples) out.push_back(load_sample(e));
  return out;
}

torch::Tensor hflip(const torch::Tensor& plane) { return plane.flip({plane.dim() - 1}); }

ImagePlane resize_plane(const ImagePlane& plane, int64_t height, int64_t width) {
  if (plane.height() == height && plane.width() == width) return plane;
  const int interp = plane.kind() == PlaneKind::mask ? cv::INTER_NEAREST : cv::INTER_LINEAR;
  cv::Mat out;
  cv::resize(to_mat(plane.data()), out, cv::Size(static_cast<int>(width), static_cast<int>(height)),
             0, 0, interp);
  return ImagePlane::make(from_mat(out).clamp_(0.0, 1.0), plane.kind());
}

namespace {

ImagePlane rotate_plane(const ImagePlane& plane, double angle_deg) {
  const int interp = plane.kind() == PlaneKind::mask ? cv::INTER_NEAREST : cv::INTER_LINEAR;
  auto src = to_mat(plane.data());
  const cv::Point2f centre(static_cast<float>(src.cols - 1) / 2.0f,
                           static_cast<float>(src.rows - 1) / 2.0f);
  cv::Mat rot = cv::getRotationMatrix2D(centre, angle_deg, 1.0);
  cv::Mat out;
  cv::warpAffine(src, out, rot, src.size(), interp, cv::BORDER_REFLECT_101);
  return ImagePlane::make(from_mat(out).clamp_(0.0, 1.0), plane.kind());
}

ImagePlane transform_plane(const ImagePlane& plane, double angle_deg, bool flip, int64_t size) {
  auto p = angle_deg != 0.0 ? rotate_plane(plane, angle_deg) : plane;
  p = resize_plane(p, size, size);
  if (flip) p = ImagePlane::make(hflip(p.data()).contiguous(), p.kind());
  return p;
}

}  // namespace

Sample augment(const Sample& sample, uint64_t seed, const AugmentOptions& options) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double angle = options.max_rotation_deg > 0.0
                           ? (2.0 * unit(rng) - 1.0) * options.max_rotation_deg
                           : 0.0;
  const bool flip = unit(rng) < options.flip_prob;

  Sample out{sample.stem, transform_plane(sample.rgb, angle, flip, options.size), std::nullopt,
             std::nullopt};
  if (sample.depth) out.depth = transform_plane(*sample.depth, angle, flip, options.size);
  if (sample.gt) out.gt = transform_plane(*sample.gt, angle, flip, options.size);
  return out;
}

Sample resize_sample(const Sample& sample, int64_t size) {
  Sample out{sample.stem, resize_plane(sample.rgb, size, size), std::nullopt, std::nullopt};
  if (sample.depth) out.depth = resize_plane(*sample.depth, size, size);
  if (sample.gt) out.gt = resize_plane(*sample.gt, size, size);
  return out;
}

namespace {

struct ToyScene {
  cv::Mat rgb;    // 8UC3, BGR
  cv::Mat depth;  // 8UC1
  cv::Mat gt;     // 8UC1
};

void draw_shape(cv::Mat& target, int kind, const cv::Point& centre, int radius, double angle,
                const cv::Scalar& colour) {
  switch (kind) {
    case 0:
      cv::circle(target, centre, radius, colour, cv::FILLED, cv::LINE_8);
      break;
    case 1: {
      cv::RotatedRect rect(centre, cv::Size2f(1.6f * radius, 1.1f * radius), static_cast<float>(angle));
      std::array<cv::Point2f, 4> corners;
      rect.points(corners.data());
      std::vector<cv::Point> pts(corners.begin(), corners.end());
      cv::fillConvexPoly(target, pts, colour, cv::LINE_8);
      break;
    }
    case 2: {
      std::vector<cv::Point> pts;
      for (int k = 0; k < 3; ++k) {
        const double a = angle * CV_PI / 180.0 + k * 2.0 * CV_PI / 3.0;
        pts.emplace_back(centre.x + static_cast<int>(std::lround(radius * std::cos(a))),
                         centre.y + static_cast<int>(std::lround(radius * std::sin(a))));
      }
      cv::fillConvexPoly(target, pts, colour, cv::LINE_8);
      break;
    }
    default:
      cv::ellipse(target, centre, cv::Size(radius, radius * 2 / 3), angle, 0, 360, colour,
                  cv::FILLED, cv::LINE_8);
      break;
  }
}

ToyScene make_scene(int size, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> shape_count(2, 4);
  std::uniform_int_distribution<int> shape_kind(0, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 8.0);

  ToyScene scene;
  scene.rgb = cv::Mat(size, size, CV_8UC3);
  scene.depth = cv::Mat::zeros(size, size, CV_8UC1);
  const cv::Vec3d c0(byte(rng), byte(rng), byte(rng));
  const cv::Vec3d c1(byte(rng), byte(rng), byte(rng));
  const bool vertical = unit(rng) < 0.5;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = static_cast<double>(vertical ? y : x) / std::max(1, size - 1);
      cv::Vec3b& px = scene.rgb.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) {
        px[c] = cv::saturate_cast<uchar>((1.0 - t) * c0[c] + t * c1[c] + noise(rng));
      }
    }
  }

  for (;;) {
    const int layers = shape_count(rng);
    cv::Mat rgb = scene.rgb.clone();
    cv::Mat depth = scene.depth.clone();
    cv::Mat nearest;
    for (int layer = 0; layer < layers; ++layer) {
      const int radius = static_cast<int>(size * (0.12 + 0.16 * unit(rng)));
      const cv::Point centre(static_cast<int>(size * (0.2 + 0.6 * unit(rng))),
                             static_cast<int>(size * (0.2 + 0.6 * unit(rng))));
      const double angle = 360.0 * unit(rng);
      const int kind = shape_kind(rng);
      const cv::Scalar colour(byte(rng), byte(rng), byte(rng));
      cv::Mat mask = cv::Mat::zeros(size, size, CV_8UC1);
      draw_shape(mask, kind, centre, radius, angle, cv::Scalar(255));
      // Nearer layers are brighter; the background stays at depth 0.
      const int depth_value = 64 + (191 * (layer + 1)) / layers;
      depth.setTo(cv::Scalar(depth_value), mask);
      cv::Mat layer_rgb(size, size, CV_8UC3);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          cv::Vec3b& px = layer_rgb.at<cv::Vec3b>(y, x);
          for (int c = 0; c < 3; ++c) px[c] = cv::saturate_cast<uchar>(colour[c] + noise(rng));
        }
      }
      layer_rgb.copyTo(rgb, mask);
      nearest = mask;
    }
    const int positives = cv::countNonZero(nearest);
    if (positives > 0 && positives < size * size) {
      scene.rgb = rgb;
      scene.depth = depth;
      scene.gt = nearest;
      return scene;
    }
  }
}

std::string toy_stem(const char* prefix, int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04lld", prefix, static_cast<long long>(i));
  return buf;
}

void write_split(const fs::path& dir, const char* prefix, int64_t count, bool labeled, int size,
                 std::mt19937_64& rng) {
  for (int64_t i = 0; i < count; ++i) {
    const auto scene = make_scene(size, rng);
    const auto name = toy_stem(prefix, i) + ".png";
    write_or_throw(dir / "rgb" / name, scene.rgb);
    if (labeled) {
      write_or_throw(dir / "depth" / name, scene.depth);
      write_or_throw(dir / "gt" / name, scene.gt);
    }
  }
}

}  // namespace

ToyCounts make_toy_data(const fs::path& out_dir, int64_t n_labeled, int64_t n_unlabeled,
                        uint64_t seed, int64_t size, int64_t n_test) {
  if (n_labeled < 0 || n_unlabeled < 0 || n_test < 0 || size < 8) {
    throw ConfigError("toy data counts must be nonnegative and size at least 8");
  }
  try {
    fs::create_directories(out_dir);
  } catch (const fs::filesystem_error& e) {
    throw IoError(e.what());
  }
  const int side = static_cast<int>(size);
  // One stream per split so adding test images leaves the other splits unchanged.
  std::mt19937_64 labeled_rng(seed);
  std::mt19937_64 unlabeled_rng(seed ^ 0x5DEECE66DULL);
  std::mt19937_64 test_rng(seed ^ 0xB5026F5AA96619E9ULL);
  write_split(out_dir / "labeled", "toy_l", n_labeled, true, side, labeled_rng);
  write_split(out_dir / "unlabeled", "toy_u", n_unlabeled, false, side, unlabeled_rng);
  if (n_test > 0) write_split(out_dir / "test", "toy_t", n_test, true, side, test_rng);
  return {n_labeled, n_unlabeled, n_test};
}

PoolSampler::PoolSampler(size_t n, uint64_t seed) : order_(n), rng_(seed) {
  if (n == 0) throw EmptyDataset("cannot sample from an empty pool");
  std::iota(order_.begin(), order_.end(), size_t{0});
  reshuffle();
}

void PoolSampler::reshuffle() { std::shuffle(order_.begin(), order_.end(), rng_); }

std::vector<size_t> PoolSampler::next(size_t k) {
  std::vector<size_t> out;
  out.reserve(k);
  while (out.size() < k) {
    if (cursor_ == order_.size()) {
      cursor_ = 0;
      ++epoch_;
      reshuffle();
    }
    out.push_back(order_[cursor_++]);
  }
  return out;
}

}  // namespace dsnet
