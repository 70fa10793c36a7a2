#include "jexpand/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "jexpand/error.hpp"
#include "jexpand/ops.hpp"

namespace jexpand {

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw ValidationError("unknown split '" + name + "' (expected train or test)");
}

namespace {

Tensor map_values(const Tensor& t, auto&& f) {
  std::vector<float> out(t.data().begin(), t.data().end());
  for (auto& v : out) v = f(v);
  return Tensor::from_data(t.shape(), std::move(out));
}

}  // namespace

Tensor clip_hu(const Tensor& image) {
  return map_values(image, [](float v) { return std::clamp(v, kHuMin, kHuMax); });
}

ClipStats compute_clip_stats(std::span<const Tensor> jmaps, Split source) {
  if (jmaps.empty()) throw ValidationError("compute_clip_stats: empty training set");
  double sum_means = 0.0, sum_sds = 0.0;
  for (const auto& m : jmaps) {
    const auto v = m.data();
    double acc = 0.0;
    for (float x : v) acc += x;
    const double mean = acc / static_cast<double>(v.size());
    double sq = 0.0;
    for (float x : v) sq += (x - mean) * (x - mean);
    sum_means += mean;
    sum_sds += std::sqrt(sq / static_cast<double>(v.size()));
  }
  const double n = static_cast<double>(jmaps.size());
  return {sum_means / n, sum_sds / n, static_cast<std::int64_t>(jmaps.size()), source};
}

Tensor clip_j(const Tensor& jmap, const ClipStats& stats) {
  if (stats.source != Split::train) {
    throw ValidationError("clip_j: clip statistics must come from the training split, got " + to_string(stats.source));
  }
  const auto lo = static_cast<float>(stats.lower()), hi = static_cast<float>(stats.upper());
  return map_values(jmap, [lo, hi](float v) { return std::clamp(v, lo, hi); });
}

Tensor rescale_to_unit(const Tensor& t, double lo, double hi) {
  if (!(hi > lo)) throw InvalidArgument("rescale_to_unit: hi must exceed lo");
  return map_values(t, [lo, hi](float v) { return static_cast<float>(2.0 * (v - lo) / (hi - lo) - 1.0); });
}

float rescale_value_from_unit(float v, double lo, double hi) {
  return static_cast<float>((static_cast<double>(v) + 1.0) * 0.5 * (hi - lo) + lo);
}

Tensor rescale_from_unit(const Tensor& t, double lo, double hi) {
  if (!(hi > lo)) throw InvalidArgument("rescale_from_unit: hi must exceed lo");
  return map_values(t, [lo, hi](float v) { return rescale_value_from_unit(v, lo, hi); });
}

Tensor crop_or_pad(const Tensor& slice, std::int64_t target_h, std::int64_t target_w, float fill) {
  if (target_h < 1 || target_w < 1) throw InvalidArgument("crop_or_pad: target must be >= 1");
  if (slice.ndim() < 2) throw ShapeError("crop_or_pad: needs [..., H, W]");
  NoGradGuard no_grad;
  Tensor out = slice;
  const std::int64_t h = slice.dim(slice.ndim() - 2), w = slice.dim(slice.ndim() - 1);
  const std::int64_t top = h > target_h ? (h - target_h) / 2 : 0;
  const std::int64_t left = w > target_w ? (w - target_w) / 2 : 0;
  if (h > target_h || w > target_w) {
    out = crop2d(out, top, left, std::min(h, target_h), std::min(w, target_w));
  }
  Padding2d pad;
  if (h < target_h) {
    pad.top = (target_h - h) / 2;
    pad.bottom = target_h - h - pad.top;
  }
  if (w < target_w) {
    pad.left = (target_w - w) / 2;
    pad.right = target_w - w - pad.left;
  }
  if (pad.top || pad.bottom || pad.left || pad.right) out = pad2d(out, pad, fill);
  return out.detach();
}

namespace {

// Float rounding of the clip bounds can leave values one ulp outside [-1, 1].
Tensor clamp_unit(const Tensor& t) {
  return map_values(t, [](float v) { return std::clamp(v, -1.0f, 1.0f); });
}

}  // namespace

Tensor preprocess_image(const Tensor& hu_slice, std::int64_t target_h, std::int64_t target_w) {
  return crop_or_pad(clamp_unit(rescale_to_unit(clip_hu(hu_slice), kHuMin, kHuMax)), target_h, target_w, kBackground);
}

Tensor preprocess_jacobian(const Tensor& j_slice, const ClipStats& stats, std::int64_t target_h,
                           std::int64_t target_w) {
  if (!(stats.sigma > 0.0)) throw ValidationError("preprocess_jacobian: clip sigma must be > 0");
  return crop_or_pad(clamp_unit(rescale_to_unit(clip_j(j_slice, stats), stats.lower(), stats.upper())), target_h,
                     target_w, kBackground);
}

}  // namespace jexpand
