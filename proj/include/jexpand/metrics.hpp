#pragma once

// Image-fidelity metrics for predicted expansion maps, plus the rank-sum
// test used to compare two models slice-by-slice.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "jexpand/tensor.hpp"

namespace jexpand::metrics {

/// Gaussian-window SSIM constants. dynamic_range is 2 for data in [-1, 1].
struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 2.0;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

/// Normalized window x window Gaussian kernel, row-major.
std::vector<double> gaussian_window(int window, double sigma);

struct Psnr {
  double db = 0.0;        // +inf when infinite
  bool infinite = false;  // MSE was exactly zero
};

/// 10*log10(peak^2 / MSE).
Psnr psnr(std::span<const float> pred, std::span<const float> target, double peak);

double mae(std::span<const float> pred, std::span<const float> target);

/// Mean of the local SSIM map over every fully-contained window position.
/// Images are [..., H, W] tensors with a single plane. Throws
/// InvalidArgument when the image is smaller than the window.
double ssim(const Tensor& pred, const Tensor& target, const SsimParams& params = {});

/// Quantile by linear interpolation between order statistics.
double quantile_linear(std::vector<double> values, double q);

/// Dice overlap of the strict above-quantile masks of each image. Both masks
/// empty gives 1.
double dsc_high(std::span<const float> pred, std::span<const float> target, double q = 0.75);

/// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation. Empty when either input is constant.
std::optional<double> spearman(std::span<const float> a, std::span<const float> b);

struct GlobalStats {
  double mean = 0.0;
  double sd = 0.0;  // population
};
GlobalStats global_stats(std::span<const float> values);

enum class UTestMethod { automatic, exact, normal };

struct UTestResult {
  double u = 0.0;        // U statistic of sample_a
  double p_value = 1.0;  // two-sided
  bool exact = false;
};

/// Mann-Whitney U. Automatic mode enumerates the exact null distribution
/// when n_a + n_b <= 12 with no ties, otherwise uses the normal
/// approximation with tie-corrected variance and continuity correction.
UTestResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b,
                           UTestMethod method = UTestMethod::automatic);

/// Table-style significance marker: "**" p<0.0001, "*" p<0.01, otherwise empty.
const char* significance_marker(double p_value);

}  // namespace jexpand::metrics
