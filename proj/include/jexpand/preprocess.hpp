#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "jexpand/tensor.hpp"

namespace jexpand {

enum class Split { train, test };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

inline constexpr float kHuMin = -1024.0f;
inline constexpr float kHuMax = 1024.0f;
/// Fill value for padding after rescaling to [-1, 1].
inline constexpr float kBackground = -1.0f;

/// Training-set statistics of the expansion maps: mu is the mean of the
/// per-map means, sigma the mean of the per-map population SDs.
struct ClipStats {
  double mu = 0.0;
  double sigma = 0.0;
  std::int64_t n_train = 0;
  Split source = Split::train;

  double lower() const { return mu - 3.0 * sigma; }
  double upper() const { return mu + 3.0 * sigma; }
};

/// Clamp to [-1024, 1024] HU.
Tensor clip_hu(const Tensor& image);

/// Throws ValidationError on an empty set.
ClipStats compute_clip_stats(std::span<const Tensor> jmaps, Split source);

/// Clamp to [mu - 3 sigma, mu + 3 sigma]. Throws ValidationError unless the
/// stats were computed on the training split.
Tensor clip_j(const Tensor& jmap, const ClipStats& stats);

/// Affine map lo -> -1, hi -> 1 (and its inverse). Throws InvalidArgument
/// when hi <= lo.
Tensor rescale_to_unit(const Tensor& t, double lo, double hi);
Tensor rescale_from_unit(const Tensor& t, double lo, double hi);
float rescale_value_from_unit(float v, double lo, double hi);

/// Center crop / symmetric pad of the last two axes to exactly
/// target_h x target_w. Odd differences put the extra row/column at the
/// bottom/right.
Tensor crop_or_pad(const Tensor& slice, std::int64_t target_h, std::int64_t target_w, float fill = kBackground);

/// Full per-slice pipelines (clip -> rescale -> crop/pad).
Tensor preprocess_image(const Tensor& hu_slice, std::int64_t target_h, std::int64_t target_w);
Tensor preprocess_jacobian(const Tensor& j_slice, const ClipStats& stats, std::int64_t target_h,
                           std::int64_t target_w);

}  // namespace jexpand
