#pragma once

// Checkpoint directory:
//   checkpoint.json   model spec, train config, seed, epoch, step, optimizer
//                     counters, loss history (no wall times), config hash
//   tensors/*.jxt     parameters, batch-norm running statistics and Adam
//                     moments, one tensor file each
// Two identical runs produce byte-identical directories.

#include <filesystem>
#include <string>

#include "jexpand/trainer.hpp"

namespace jexpand::ckpt {

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& dir, const train::TrainState& state, const std::string& config_hash);

/// Rebuilds the full training state. Throws IoError / FormatError /
/// ValidationError.
train::TrainState load_checkpoint(const std::filesystem::path& dir);

struct CheckpointInfo {
  nets::ModelSpec spec;
  train::TrainConfig config;
  int epoch = 0;
  std::int64_t global_step = 0;
  std::string config_hash;
};

CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir);

/// Generator with its trained parameters and running statistics.
nets::Generator load_generator(const std::filesystem::path& dir);

}  // namespace jexpand::ckpt
