#pragma once

// Synthetic paired data: smooth deformation fields, their Jacobian
// determinant maps, and expiration-like images coupled to those maps.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "jexpand/tensor.hpp"

namespace jexpand::phantom {

/// Point on the grid as (row, col); both in voxels.
struct Point {
  double row = 0.0;
  double col = 0.0;
};

/// Gaussian bump contributing amplitude * exp(-|p - center|^2 / (2 width^2)).
struct Bump {
  Point center;
  double amp_row = 0.0;
  double amp_col = 0.0;
  double width = 1.0;
};

enum class FieldKind { analytic_affine, smooth_random };

/// Displacement u(p) on an H x W grid; phi(p) = p + u(p).
class DeformationField {
 public:
  /// u(p) = (A - I) p + t with p = (row, col). A is row-major 2x2.
  static DeformationField affine(std::int64_t height, std::int64_t width, std::array<double, 4> a,
                                 std::array<double, 2> t);
  /// u(p) = scale * sum of bumps.
  static DeformationField smooth(std::int64_t height, std::int64_t width, std::vector<Bump> bumps, double scale);
  static DeformationField identity(std::int64_t height, std::int64_t width);

  std::int64_t height() const { return height_; }
  std::int64_t width() const { return width_; }
  FieldKind kind() const { return kind_; }

  /// Sampled displacement at integer grid point (row, col) -> (du_row, du_col).
  std::array<double, 2> at(std::int64_t row, std::int64_t col) const;
  /// Continuous evaluation of the analytic generator at any point.
  std::array<double, 2> evaluate(Point p) const;

  const std::array<double, 4>& affine_matrix() const { return a_; }
  const std::array<double, 2>& affine_offset() const { return t_; }
  const std::vector<Bump>& bumps() const { return bumps_; }
  double scale() const { return scale_; }

 private:
  DeformationField() = default;
  void sample();

  std::int64_t height_ = 0, width_ = 0;
  FieldKind kind_ = FieldKind::smooth_random;
  std::array<double, 4> a_{1, 0, 0, 1};
  std::array<double, 2> t_{0, 0};
  std::vector<Bump> bumps_;
  double scale_ = 1.0;
  std::vector<double> disp_;  // (du_row, du_col) interleaved, row-major
};

struct JacobianMap {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<double> values;   // row-major
  std::int64_t non_positive = 0;  // voxels with J <= 0 (folding)

  double at(std::int64_t row, std::int64_t col) const { return values[row * width + col]; }
  double min() const;
  double mean() const;
  double sd() const;  // population
};

/// det(d phi / d p) with central differences in the interior and
/// second-order one-sided differences on the border. Exact for affine fields.
JacobianMap jacobian_determinant(const DeformationField& field);

struct PhantomSpec {
  std::int64_t height = 64;
  std::int64_t width = 64;
  double severity = 0.5;
  int num_blobs = 12;
  double smoothness_scale = 8.0;
  double noise_sd = 20.0;  // HU
  std::uint64_t seed = 0;

  void validate() const;  // size >= 16x16, severity in [0,1], ...
};

/// Sum of num_blobs random Gaussian bumps, halved until min J > 0.05.
/// Throws ValidationError if 20 halvings do not suffice.
DeformationField make_smooth_field(const PhantomSpec& spec);

struct PhantomPair {
  Tensor image;      // [H, W], Hounsfield-like units
  JacobianMap jmap;  // expansion map
  Tensor texture;    // [H, W] texture component that was added to the image
};

/// Target mean and SD of J for a severity level (linear in severity).
double target_mean_j(double severity);
double target_sd_j(double severity);

/// Fixed monotone map from expansion J to expiration intensity in
/// [-1000, 100] HU.
double intensity_from_j(double j);

PhantomPair make_phantom_pair(const PhantomSpec& spec);

}  // namespace jexpand::phantom
