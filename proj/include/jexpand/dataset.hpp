#pragma once

// Dataset manifests, in-memory sample pairs and deterministic batching.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jexpand/preprocess.hpp"
#include "jexpand/tensor.hpp"

namespace jexpand {

enum class DataStage { raw, processed };

struct ManifestEntry {
  std::string id;
  std::string x_path;  // relative to the manifest directory
  std::string y_path;
  std::string severity_tag;
  Split split = Split::train;
};

struct DatasetManifest {
  static constexpr int kVersion = 1;

  int version = kVersion;
  DataStage stage = DataStage::raw;
  std::int64_t slice_h = 0;
  std::int64_t slice_w = 0;
  std::optional<ClipStats> clip_stats;
  std::string config_hash;
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // not serialized; set by load()

  /// Ids unique, splits valid, processed manifests carry train clip stats.
  /// With check_files, every referenced file must exist.
  void validate(bool check_files) const;
  std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }
  std::vector<const ManifestEntry*> entries_in(Split split) const;

  /// Throws IoError / ValidationError.
  static DatasetManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct SamplePair {
  Tensor x;  // [H, W]
  Tensor y;  // [H, W]
  std::string severity_tag;
  std::string id;
};

/// Loads every pair of a split. For processed manifests values are checked
/// to lie in [-1, 1] and slices to match the manifest slice size. Throws
/// ValidationError on an empty split.
std::vector<SamplePair> load_split(const DatasetManifest& manifest, Split split);

struct Batch {
  Tensor x;  // [B, 1, H, W]
  Tensor y;  // [B, 1, H, W]
  std::vector<std::int64_t> indices;
};

Batch make_batch(const std::vector<SamplePair>& samples, const std::vector<std::int64_t>& indices);

/// Shuffled drop-last batching. The order of epoch e depends only on
/// (seed, e), so a resumed run sees the same batches.
class BatchIterator {
 public:
  /// Throws ValidationError when num_samples == 0 or the batch size is odd
  /// or below 2.
  BatchIterator(std::int64_t num_samples, std::int64_t batch_size, std::uint64_t seed);

  std::int64_t batch_size() const { return batch_size_; }
  std::int64_t batches_per_epoch() const { return num_samples_ / batch_size_; }
  std::vector<std::vector<std::int64_t>> epoch(std::int64_t epoch) const;

 private:
  std::int64_t num_samples_;
  std::int64_t batch_size_;
  std::uint64_t seed_;
};

/// Stream of assembled batches over one split of a manifest.
class BatchStream {
 public:
  BatchStream(std::vector<SamplePair> samples, std::int64_t batch_size, std::uint64_t seed);
  BatchStream(const DatasetManifest& manifest, Split split, std::int64_t batch_size, std::uint64_t seed);

  std::int64_t batches_per_epoch() const { return iterator_.batches_per_epoch(); }
  std::vector<Batch> epoch(std::int64_t epoch) const;
  const std::vector<SamplePair>& samples() const { return samples_; }

 private:
  std::vector<SamplePair> samples_;
  BatchIterator iterator_;
};

}  // namespace jexpand
