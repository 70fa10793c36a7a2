#pragma once

// Adversarial training loop: discriminator step, then generator step with
// optional top-k sample selection, Adam on both, per-epoch logging and
// checkpointing.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jexpand/dataset.hpp"
#include "jexpand/networks.hpp"
#include "jexpand/params.hpp"

namespace jexpand::train {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double lr_g = 2e-4;
  double lr_d = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  bool drs_enabled = false;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0: only the final checkpoint
  nets::ModelKind model_kind = nets::ModelKind::ours_drs;

  /// B even and >= 2, learning rates > 0, epochs >= 0.
  void validate() const;
};

/// Number of samples kept for the generator update in `epoch`.
/// Starts at B, drops every 10 epochs by ceil((B/2) / D) where D is the
/// index of the final decade (at least 1), and never goes below B/2, so the
/// final decade uses exactly B/2. Runs of 10 epochs or fewer keep k = B.
int k_for_epoch(int epoch, int batch_size, int total_epochs);

/// Indices of the k largest scores in ascending index order. Ties go to
/// the lower index.
std::vector<std::int64_t> select_top_k(std::span<const double> scores, int k);

/// Mean of each sample's patch score map [N, 1, h, w].
std::vector<double> per_sample_scores(const Tensor& score_map);

struct EpochLog {
  int epoch = 0;
  int k = 0;
  double d_loss = 0.0;
  double g_adv = 0.0;
  double g_ch = 0.0;      // un-weighted reconstruction term
  double seconds = 0.0;   // wall time, never checkpointed
};

struct TrainState {
  TrainState(nets::ModelSpec spec, TrainConfig config);

  nets::ModelSpec spec;
  TrainConfig config;
  nets::Generator generator;
  std::optional<nets::Discriminator> discriminator;
  AdamState adam_g;
  AdamState adam_d;
  int epoch = 0;  // completed epochs
  std::int64_t global_step = 0;
  std::vector<EpochLog> history;
};

struct StepStats {
  double d_loss = 0.0;
  double g_adv = 0.0;
  double g_recon = 0.0;
  int k = 0;
  std::vector<std::int64_t> kept;  // samples that drove the generator update
  bool d_skipped = false;
  bool g_skipped = false;
};

/// One discriminator update on the full batch followed by one generator
/// update on the k best-scored samples (k = B when top-k is off).
StepStats train_step(TrainState& state, const Batch& batch, int k);

struct FitOptions {
  std::filesystem::path out_dir;
  std::string config_hash;
  std::function<void(const EpochLog&)> on_epoch;
};

struct FitResult {
  std::filesystem::path final_checkpoint;
  std::vector<EpochLog> log;
};

/// Trains from state.epoch up to config.epochs. Writes
/// out_dir/epoch_NNNN every checkpoint_every epochs, out_dir/final at the
/// end and out_dir/train_log.csv. A state restored with load_checkpoint
/// continues the original trajectory exactly.
FitResult fit(TrainState& state, const std::vector<SamplePair>& train, const FitOptions& options);

inline constexpr const char* kTrainLogHeader = "epoch,k,d_loss,g_adv,g_ch,seconds";

}  // namespace jexpand::train
