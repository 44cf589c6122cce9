#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "dsnet/checkpoint.hpp"
#include "dsnet/config.hpp"
#include "dsnet/data.hpp"
#include "dsnet/losses.hpp"
#include "dsnet/model.hpp"

namespace dsnet {

/// lr0 * (1 - t / t_max)^power. Throws OutOfRange unless 0 <= t <= t_max.
double poly_lr(double t, double t_max, double lr0, double power);

/// Parameters split for weight decay: biases and normalization scales (every
/// parameter of rank <= 1) are exempt.
struct ParamGroups {
  std::vector<torch::Tensor> decayed;
  std::vector<torch::Tensor> exempt;
};

ParamGroups split_weight_decay(const std::vector<torch::Tensor>& params);

/// SGD with momentum over two groups: group 0 decays, group 1 does not.
std::unique_ptr<torch::optim::SGD> make_sgd(const std::vector<torch::Tensor>& params,
                                            const RunConfig& run);

/// Sets the learning rate of every group.
void set_learning_rate(torch::optim::Optimizer& optimizer, double lr);

/// One row of the loss trace.
struct StepRecord {
  int64_t iteration = 0;
  double lr = 0.0;
  double lambda = 0.0;
  double labeled = 0.0;
  double unlabeled = 0.0;
  double total = 0.0;
};

struct TrainOptions {
  torch::Device device = torch::kCPU;
  /// Called after every optimizer step.
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> steps;
};

/// Stage 1: trains the RGB encoder, decoupling and depth head on MSE(P_d, G_d)
/// only. Every labeled sample needs depth. Throws EmptyDataset.
TrainResult train_stage1_depth(const Config& config, const std::vector<Sample>& labeled,
                               const TrainOptions& options = {});

/// Stage 3: mean-teacher training on labeled RGB-D samples plus unlabeled RGB
/// with pseudo depth. The encoder and decoupling weights come from `init`
/// unless config.run.init is scratch. Throws EmptyDataset, MissingCheckpoint.
TrainResult train_stage3_semi(const Config& config, const std::vector<Sample>& labeled,
                              const std::vector<Sample>& unlabeled, const Checkpoint* init,
                              const TrainOptions& options = {});

/// The stage-3 loop without unlabeled data or teacher. `init` may be null, in
/// which case every layer starts from random weights.
TrainResult train_supervised(const Config& config, const std::vector<Sample>& labeled,
                             const Checkpoint* init, const TrainOptions& options = {});

/// Writes one 16-bit pseudo-depth map per image of `rgb_dir` under `out_dir`,
/// same stem, at the image's own resolution. Returns the number written.
/// Throws UnreadableImage naming the offending file.
int64_t generate_pseudo_depth(const Checkpoint& checkpoint, const std::filesystem::path& rgb_dir,
                              const std::filesystem::path& out_dir);
/// As above, loading the checkpoint first. Throws MissingCheckpoint.
int64_t generate_pseudo_depth(const std::filesystem::path& checkpoint,
                              const std::filesystem::path& rgb_dir,
                              const std::filesystem::path& out_dir);

/// Student-only prediction at the image's own resolution. Without depth the
/// model's depth branch supplies a min-max normalized pseudo depth; a model
/// without that branch throws Error.
PredictionPair infer(const Checkpoint& checkpoint, const ImagePlane& rgb,
                     const std::optional<ImagePlane>& depth);

/// Runs infer over every image of `rgb_dir` (depth from `depth_dir` by stem
/// when given) and writes 8-bit saliency maps to `out_dir`. Returns the count.
int64_t infer_dir(const Checkpoint& checkpoint, const std::filesystem::path& rgb_dir,
                  const std::optional<std::filesystem::path>& depth_dir,
                  const std::filesystem::path& out_dir);

/// Mean saliency MAE of `model` over `samples`, each resized to the model's
/// input size, in eval mode.
double saliency_mae(Ddcnn& model, const std::vector<Sample>& samples);

/// Mean depth MSE of the depth branch over `samples`.
double depth_mse(Ddcnn& model, const std::vector<Sample>& samples);

}  // namespace dsnet
