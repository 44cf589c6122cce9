#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dsnet/data.hpp"
#include "dsnet/losses.hpp"
#include "dsnet/mean_teacher.hpp"
#include "dsnet/model.hpp"

namespace dsnet {

enum class Stage { depth_pretrain, pseudo_depth, semi, supervised_only };

Stage parse_stage(std::string_view name);
std::string_view to_string(Stage stage);

enum class InitMode { checkpoint, scratch };

/// Table-2 style ablation switches.
struct Ablation {
  bool no_dam = false;
  bool no_dgm = false;
  bool no_dim = false;
  bool no_depth_branch = false;
  bool no_reconstruction = false;
  bool no_attention_consistency = false;

  /// Parses a comma separated list of flag names; an empty string disables all.
  static Ablation parse(std::string_view list);
  std::string to_string() const;
};

struct RunConfig {
  Stage stage = Stage::semi;
  int64_t batch_labeled = 4;
  int64_t batch_unlabeled = 4;
  int64_t max_iter = 20000;
  double lr0 = 0.001;
  double poly_power = 0.9;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  uint64_t seed = 0;
  Ablation ablation;
  /// Stage-3 initialization from the depth-pretraining checkpoint, or from scratch.
  InitMode init = InitMode::checkpoint;
  bool deterministic = true;
  /// Print a progress line every this many iterations; 0 disables logging.
  int64_t log_every = 0;
};

/// Everything a run needs, loadable from an INI-style file with sections
/// [model] [backbone] [dgm] [dim] [decoder] [aspp] [loss] [ema] [perturb]
/// [augment] [train].
struct Config {
  ModelConfig model;
  LossWeights loss;
  EmaOptions ema;
  PerturbOptions perturb;
  AugmentOptions augment;
  RunConfig run;

  /// Model configuration with the ablation switches folded in.
  ModelConfig effective_model() const;

  /// Checks the cross-field invariants (batch sizes, nonnegative weights...).
  /// Throws ConfigError.
  void validate() const;
};

/// Parses INI text; unknown keys are rejected, missing keys keep their defaults
/// and the result is validated.
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);
/// Sets one "section.key" entry as if it appeared in a config file. Throws
/// ConfigError for unknown keys or malformed values.
void set_config_value(Config& config, const std::string& key, const std::string& value);

/// Serializes every key, so parse_config(to_ini(c)) reproduces c.
std::string to_ini(const Config& config);

}  // namespace dsnet
