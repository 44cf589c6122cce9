#include "dsnet/mean_teacher.hpp"

#include <random>

namespace dsnet {

TeacherInput parse_teacher_input(std::string_view name) {
  if (name == "jitter") return TeacherInput::jitter;
  if (name == "clean") return TeacherInput::clean;
  throw ConfigError("unknown perturb.teacher '" + std::string(name) + "' (expected jitter|clean)");
}

std::string_view to_string(TeacherInput mode) {
  return mode == TeacherInput::jitter ? "jitter" : "clean";
}

uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void ema_update(std::vector<torch::Tensor>& teacher, const std::vector<torch::Tensor>& student,
                double decay) {
  if (teacher.size() != student.size()) {
    throw ShapeMismatch("EMA parameter lists differ in length: " + std::to_string(teacher.size()) +
                        " vs " + std::to_string(student.size()));
  }
  for (size_t i = 0; i < teacher.size(); ++i) {
    require_same_shape(teacher[i], student[i], "EMA parameter");
  }
  torch::NoGradGuard no_grad;
  for (size_t i = 0; i < teacher.size(); ++i) {
    teacher[i].mul_(decay).add_(student[i].detach(), 1.0 - decay);
  }
}

EmaTeacher::EmaTeacher(const Ddcnn& student, double decay) : decay_(decay) {
  if (!(decay >= 0.0 && decay <= 1.0)) throw ConfigError("ema.decay must lie in [0,1]");
  teacher_ = clone_model(student);
  for (auto& p : teacher_->parameters()) p.set_requires_grad(false);
}

void EmaTeacher::update(const Ddcnn& student) {
  auto teacher_params = teacher_->parameters();
  ema_update(teacher_params, student->parameters(), decay_);
  torch::NoGradGuard no_grad;
  auto student_buffers = student->named_buffers();
  for (auto& item : teacher_->named_buffers()) {
    item.value().copy_(student_buffers[item.key()]);
  }
  ++step_;
}

namespace {

torch::Tensor blend(const torch::Tensor& img, const torch::Tensor& other, double ratio) {
  return (ratio * img + (1.0 - ratio) * other).clamp(0.0, 1.0);
}

torch::Tensor grayscale(const torch::Tensor& img) {
  // ITU-R 601-2 luma, channel axis at dim 0 of a 3 x H x W image.
  return (0.299 * img[0] + 0.587 * img[1] + 0.114 * img[2]).unsqueeze(0);
}

torch::Tensor jitter_one(const torch::Tensor& img, double jitter, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> factor(1.0 - jitter, 1.0 + jitter);
  const double brightness = factor(rng);
  const double contrast = factor(rng);
  const double saturation = factor(rng);
  auto out = blend(img, torch::zeros_like(img), brightness);
  out = blend(out, grayscale(out).mean().expand_as(out), contrast);
  out = blend(out, grayscale(out).expand_as(out), saturation);
  return out;
}

}  // namespace

torch::Tensor perturb(const torch::Tensor& rgb, double jitter, uint64_t seed) {
  if (jitter < 0.0) throw ConfigError("perturb.jitter must be nonnegative");
  if (jitter == 0.0) return rgb.clone();
  const bool batched = rgb.dim() == 4;
  if ((batched && rgb.size(1) != 3) || (!batched && (rgb.dim() != 3 || rgb.size(0) != 3))) {
    throw ShapeMismatch("perturb expects (B x) 3 x H x W, got " + shape_string(rgb.sizes()));
  }
  torch::NoGradGuard no_grad;
  if (!batched) {
    std::mt19937_64 rng(seed);
    return jitter_one(rgb, jitter, rng);
  }
  std::vector<torch::Tensor> out;
  out.reserve(rgb.size(0));
  for (int64_t b = 0; b < rgb.size(0); ++b) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(b)));
    out.push_back(jitter_one(rgb[b], jitter, rng));
  }
  return torch::stack(out);
}

ImagePlane perturb(const ImagePlane& rgb, double jitter, uint64_t seed) {
  if (rgb.kind() != PlaneKind::rgb) throw ShapeMismatch("perturb needs an rgb plane");
  return ImagePlane::make(perturb(rgb.data(), jitter, seed), PlaneKind::rgb);
}

PairedOutputs paired_forward(Ddcnn& student, Ddcnn& teacher, const torch::Tensor& rgb,
                             const torch::Tensor& pseudo_depth, uint64_t seed,
                             const PerturbOptions& options) {
  const auto student_rgb = perturb(rgb, options.jitter, mix_seed(seed, 0));
  const auto teacher_rgb = options.teacher == TeacherInput::clean
                               ? rgb
                               : perturb(rgb, options.jitter, mix_seed(seed, 1));
  PairedOutputs out;
  out.student = student->forward(student_rgb, pseudo_depth);
  {
    torch::NoGradGuard no_grad;
    out.teacher = teacher->forward(teacher_rgb, pseudo_depth);
  }
  return out;
}

}  // namespace dsnet
