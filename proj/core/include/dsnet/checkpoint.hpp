#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsnet/config.hpp"
#include "dsnet/model.hpp"

namespace dsnet {

inline constexpr int64_t kCheckpointVersion = 1;

/// Everything a finished or interrupted stage leaves behind.
struct Checkpoint {
  Config config;
  Stage stage = Stage::semi;
  int64_t iteration = 0;
  Ddcnn student{nullptr};
  /// Absent (null) for stages without a teacher.
  Ddcnn teacher{nullptr};
  int64_t teacher_step = 0;
  /// Serialized optimizer archive; empty when no optimizer ran.
  std::string optimizer_state;
  /// State of the global torch generator when the checkpoint was taken.
  torch::Tensor rng_state;
  std::vector<double> loss_trace;
};

/// Writes a versioned archive. Throws IoError.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Rebuilds the models from the stored configuration and loads their state.
/// Throws MissingCheckpoint when the file is absent or not a checkpoint.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Serializes an optimizer to bytes and back.
std::string save_optimizer(const torch::optim::Optimizer& optimizer);
void load_optimizer(torch::optim::Optimizer& optimizer, const std::string& bytes);

}  // namespace dsnet
