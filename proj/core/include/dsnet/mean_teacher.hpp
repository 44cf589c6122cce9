#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string_view>
#include <vector>

#include "dsnet/core_types.hpp"
#include "dsnet/model.hpp"

namespace dsnet {

struct EmaOptions {
  double decay = 0.99;
};

enum class TeacherInput { jitter, clean };

TeacherInput parse_teacher_input(std::string_view name);
std::string_view to_string(TeacherInput mode);

struct PerturbOptions {
  /// Brightness, contrast and saturation factors are drawn from [1-j, 1+j].
  double jitter = 0.4;
  TeacherInput teacher = TeacherInput::jitter;
};

/// teacher <- decay * teacher + (1 - decay) * student, element-wise and in
/// place. Throws ShapeMismatch unless the two lists mirror each other.
void ema_update(std::vector<torch::Tensor>& teacher, const std::vector<torch::Tensor>& student,
                double decay);

/// The exponential-moving-average copy of a student model. Buffers (batch
/// norm statistics) are copied from the student rather than averaged.
class EmaTeacher {
 public:
  EmaTeacher(const Ddcnn& student, double decay);

  void update(const Ddcnn& student);

  Ddcnn& model() { return teacher_; }
  const Ddcnn& model() const { return teacher_; }
  double decay() const { return decay_; }
  int64_t step() const { return step_; }
  void set_step(int64_t step) { step_ = step; }

 private:
  Ddcnn teacher_{nullptr};
  double decay_;
  int64_t step_ = 0;
};

/// Photometric jitter of an RGB batch (B x 3 x H x W) or single image
/// (3 x H x W): brightness, contrast and saturation in that order, each
/// clamped to [0,1]. Deterministic in `seed`; jitter 0 returns the input
/// values unchanged.
torch::Tensor perturb(const torch::Tensor& rgb, double jitter, uint64_t seed);

ImagePlane perturb(const ImagePlane& rgb, double jitter, uint64_t seed);

struct PairedOutputs {
  DdcnnOutput student;
  DdcnnOutput teacher;
};

/// Student sees perturb(rgb, s), teacher sees perturb(rgb, t) (or the clean
/// batch) with independent seeds derived from `seed`; both get the same
/// pseudo depth. The teacher runs without gradient tracking.
PairedOutputs paired_forward(Ddcnn& student, Ddcnn& teacher, const torch::Tensor& rgb,
                             const torch::Tensor& pseudo_depth, uint64_t seed,
                             const PerturbOptions& options);

/// SplitMix64 step; used to derive independent sub-seeds.
uint64_t mix_seed(uint64_t seed, uint64_t stream);

}  // namespace dsnet
