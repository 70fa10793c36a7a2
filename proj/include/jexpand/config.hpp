#pragma once

// Experiment configuration file (JSON, unknown keys rejected) and the two
// built-in presets.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "jexpand/networks.hpp"
#include "jexpand/phantom.hpp"
#include "jexpand/trainer.hpp"

namespace jexpand {

struct PhantomDatasetConfig {
  std::int64_t count = 650;
  std::optional<std::int64_t> train_count;  // default: 70% of count
  std::string severity_mix = "low:0.1,mid:0.5,high:0.9";
  phantom::PhantomSpec spec;  // severity and seed are set per pair
};

struct ExperimentConfig {
  std::string preset = "desk";
  nets::ModelKind model = nets::ModelKind::ours_drs;
  std::uint64_t seed = 0;
  train::TrainConfig train;  // model_kind, seed and drs flag are filled from the fields above
  std::optional<bool> drs_enabled;  // default: on for ours_drs only
  nets::GeneratorConfig generator;
  nets::DiscriminatorConfig discriminator;
  std::optional<nets::NormKind> generator_norm;  // default: per model kind
  std::optional<nets::NormKind> discriminator_norm;
  std::optional<double> lambda;  // default: per model kind
  std::optional<double> eps;
  PhantomDatasetConfig phantom;
  std::string manifest;  // processed manifest used by train/evaluate
  std::string out_dir;

  /// Model + loss configuration: build_baseline(model) with the explicit
  /// overrides above applied.
  nets::ModelSpec model_spec() const;
  /// Train config with model kind, seed and DRS flag resolved.
  train::TrainConfig resolved_train() const;
  void validate() const;
};

/// "desk" (64x64, B=16, 200 epochs) or "paper" (256x256, B=64,
/// lambda 200, eps 1e-6, lr 2e-4 / 1e-4, depth 8, base 64). Throws
/// InvalidArgument for other names.
ExperimentConfig preset_config(const std::string& name);

/// Starts from the preset named by the "preset" key (default desk) and
/// applies every other key. Syntax errors report line and column; unknown
/// keys and bad values throw ConfigError.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON (sorted keys, every field present).
std::string to_json_string(const ExperimentConfig& config, int indent = 2);
/// FNV-1a 64 of the compact canonical JSON without the paths section, 16
/// hex digits.
std::string config_hash(const ExperimentConfig& config);
std::string fnv1a_hex(const std::string& bytes);

}  // namespace jexpand
