#pragma once

// Phantom dataset generation (files + raw manifest) and dataset-level
// preprocessing (raw manifest -> processed manifest).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jexpand/dataset.hpp"
#include "jexpand/phantom.hpp"

namespace jexpand {

struct SeverityLevel {
  std::string tag;
  double severity = 0.5;
  double weight = 1.0;
};

/// "tag:severity[:weight],..." e.g. "low:0.1,mid:0.5,high:0.9". Throws
/// InvalidArgument on malformed input, duplicate tags or severities
/// outside [0, 1].
std::vector<SeverityLevel> parse_severity_mix(const std::string& spec);

/// Largest-remainder apportionment of `total` by `weights` (ties to the
/// earlier entry).
std::vector<std::int64_t> apportion(std::int64_t total, const std::vector<double>& weights);

/// Train/test assignment stratified by tag: every tag contributes its
/// proportional share of `train_count` (largest remainder), the members
/// chosen by a seeded shuffle.
std::vector<Split> stratified_split(const std::vector<std::string>& tags, std::int64_t train_count,
                                    std::uint64_t seed);

struct PhantomGenOptions {
  std::filesystem::path out_dir;
  std::int64_t count = 0;
  std::string severity_mix = "low:0.1,mid:0.5,high:0.9";
  std::uint64_t seed = 0;
  std::optional<std::int64_t> train_count;  // default round(0.7 * count)
  double severity_jitter = 0.05;            // uniform, per pair
  phantom::PhantomSpec base;                // size and field settings
  std::string config_hash;
};

/// Writes raw/<id>_x.jxt (HU) and raw/<id>_y.jxt (J) for every pair and
/// out_dir/manifest.json. The same options produce byte-identical files.
DatasetManifest generate_phantom_dataset(const PhantomGenOptions& options);

struct PreprocessOptions {
  std::filesystem::path out_dir;
  std::int64_t target_h = 64;
  std::int64_t target_w = 64;
  Split stats_split = Split::train;  // anything else is rejected
  std::string config_hash;
};

/// Clip statistics from the training maps, then clip / rescale / crop-pad
/// every entry into out_dir/processed, writing out_dir/manifest.json. An
/// already processed manifest passes through unchanged apart from
/// crop/pad to the target size.
DatasetManifest preprocess_dataset(const DatasetManifest& input, const PreprocessOptions& options);

}  // namespace jexpand
