#include "jexpand/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "jexpand/error.hpp"
#include "jexpand/random.hpp"

namespace jexpand::phantom {

namespace {

constexpr double kMinJacobian = 0.05;
constexpr int kMaxHalvings = 20;
// Severity 0 -> (1.9, 0.5), severity 1 -> (1.1, 0.15).
constexpr double kMeanAtZero = 1.9, kMeanAtOne = 1.1;
constexpr double kSdAtZero = 0.5, kSdAtOne = 0.15;
constexpr double kGradientWeight = 0.5;
constexpr double kTextureAmplitude = 12.0;  // HU

enum Stream : std::uint64_t { kFieldStream = 1, kTextureStream = 2, kNoiseStream = 3 };

}  // namespace

DeformationField DeformationField::affine(std::int64_t height, std::int64_t width, std::array<double, 4> a,
                                          std::array<double, 2> t) {
  DeformationField f;
  f.height_ = height;
  f.width_ = width;
  f.kind_ = FieldKind::analytic_affine;
  f.a_ = a;
  f.t_ = t;
  f.sample();
  return f;
}

DeformationField DeformationField::smooth(std::int64_t height, std::int64_t width, std::vector<Bump> bumps,
                                          double scale) {
  DeformationField f;
  f.height_ = height;
  f.width_ = width;
  f.kind_ = FieldKind::smooth_random;
  f.bumps_ = std::move(bumps);
  f.scale_ = scale;
  f.sample();
  return f;
}

DeformationField DeformationField::identity(std::int64_t height, std::int64_t width) {
  return smooth(height, width, {}, 1.0);
}

std::array<double, 2> DeformationField::evaluate(Point p) const {
  if (kind_ == FieldKind::analytic_affine) {
    return {(a_[0] - 1.0) * p.row + a_[1] * p.col + t_[0], a_[2] * p.row + (a_[3] - 1.0) * p.col + t_[1]};
  }
  double ur = 0.0, uc = 0.0;
  for (const auto& b : bumps_) {
    const double dr = p.row - b.center.row, dc = p.col - b.center.col;
    const double g = std::exp(-(dr * dr + dc * dc) / (2.0 * b.width * b.width));
    ur += b.amp_row * g;
    uc += b.amp_col * g;
  }
  return {scale_ * ur, scale_ * uc};
}

void DeformationField::sample() {
  if (height_ < 1 || width_ < 1) throw InvalidArgument("deformation field needs a nonempty grid");
  disp_.resize(static_cast<std::size_t>(2 * height_ * width_));
  for (std::int64_t r = 0; r < height_; ++r)
    for (std::int64_t c = 0; c < width_; ++c) {
      auto u = evaluate({static_cast<double>(r), static_cast<double>(c)});
      if (!std::isfinite(u[0]) || !std::isfinite(u[1])) throw NonFiniteError("deformation field is not finite");
      disp_[2 * (r * width_ + c)] = u[0];
      disp_[2 * (r * width_ + c) + 1] = u[1];
    }
}

std::array<double, 2> DeformationField::at(std::int64_t row, std::int64_t col) const {
  const auto i = static_cast<std::size_t>(2 * (row * width_ + col));
  return {disp_[i], disp_[i + 1]};
}

double JacobianMap::min() const { return *std::min_element(values.begin(), values.end()); }

double JacobianMap::mean() const {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

double JacobianMap::sd() const {
  const double m = mean();
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

namespace {

// Derivative of samples f(0..n-1) at index i: central inside, second-order
// one-sided at the ends. All three stencils are exact on linear functions.
template <typename F>
double derivative(F&& f, std::int64_t i, std::int64_t n) {
  if (i == 0) return (-3.0 * f(0) + 4.0 * f(1) - f(2)) / 2.0;
  if (i == n - 1) return (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / 2.0;
  return (f(i + 1) - f(i - 1)) / 2.0;
}

}  // namespace

JacobianMap jacobian_determinant(const DeformationField& field) {
  const std::int64_t h = field.height(), w = field.width();
  if (h < 3 || w < 3) throw InvalidArgument("jacobian_determinant: grid must be at least 3x3");
  JacobianMap out;
  out.height = h;
  out.width = w;
  out.values.resize(static_cast<std::size_t>(h * w));
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      auto along_row = [&](int comp) {
        return derivative([&](std::int64_t i) { return field.at(i, c)[comp]; }, r, h);
      };
      auto along_col = [&](int comp) {
        return derivative([&](std::int64_t j) { return field.at(r, j)[comp]; }, c, w);
      };
      const double a = 1.0 + along_row(0);  // d phi_row / d row
      const double b = along_col(0);        // d phi_row / d col
      const double cc = along_row(1);       // d phi_col / d row
      const double d = 1.0 + along_col(1);  // d phi_col / d col
      const double det = a * d - b * cc;
      out.values[r * w + c] = det;
      if (det <= 0.0) ++out.non_positive;
    }
  return out;
}

void PhantomSpec::validate() const {
  if (height < 16 || width < 16) throw ValidationError("phantom size must be at least 16x16");
  if (!(severity >= 0.0 && severity <= 1.0)) throw ValidationError("phantom severity must lie in [0,1]");
  if (num_blobs < 0) throw ValidationError("num_blobs must be >= 0");
  if (!(smoothness_scale > 0.0)) throw ValidationError("smoothness_scale must be > 0");
  if (!(noise_sd >= 0.0)) throw ValidationError("noise_sd must be >= 0");
}

DeformationField make_smooth_field(const PhantomSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.seed, kFieldStream));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Bump> bumps;
  bumps.reserve(static_cast<std::size_t>(spec.num_blobs));
  const double amp = 0.4 * spec.smoothness_scale;
  for (int i = 0; i < spec.num_blobs; ++i) {
    Bump b;
    b.center = {unit(rng) * static_cast<double>(spec.height - 1), unit(rng) * static_cast<double>(spec.width - 1)};
    b.amp_row = amp * normal(rng);
    b.amp_col = amp * normal(rng);
    b.width = spec.smoothness_scale * (0.75 + 0.5 * unit(rng));
    bumps.push_back(b);
  }
  double scale = 1.0;
  for (int attempt = 0; attempt <= kMaxHalvings; ++attempt) {
    auto field = DeformationField::smooth(spec.height, spec.width, bumps, scale);
    if (jacobian_determinant(field).min() > kMinJacobian) return field;
    scale *= 0.5;
  }
  throw ValidationError("make_smooth_field: could not reach min J > 0.05 within 20 halvings");
}

double target_mean_j(double severity) { return kMeanAtZero + (kMeanAtOne - kMeanAtZero) * severity; }
double target_sd_j(double severity) { return kSdAtZero + (kSdAtOne - kSdAtZero) * severity; }

double intensity_from_j(double j) { return -1000.0 + 1100.0 / (1.0 + std::exp(-(j - 1.5) / 0.35)); }

namespace {

void standardize(std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  s = std::sqrt(s / static_cast<double>(v.size()));
  for (double& x : v) x = s > 0.0 ? (x - m) / s : 0.0;
}

std::vector<double> make_texture(const PhantomSpec& spec) {
  std::mt19937_64 rng(derive_seed(spec.seed, kTextureStream));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  struct Wave {
    double fr, fc, phase, amp;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 3; ++k) {
    const double period = 3.0 + 4.0 * unit(rng);
    const double angle = std::numbers::pi * unit(rng);
    waves.push_back({std::cos(angle) / period, std::sin(angle) / period, 2.0 * std::numbers::pi * unit(rng),
                     kTextureAmplitude / 3.0});
  }
  std::vector<double> tex(static_cast<std::size_t>(spec.height * spec.width));
  for (std::int64_t r = 0; r < spec.height; ++r)
    for (std::int64_t c = 0; c < spec.width; ++c) {
      double v = 0.0;
      for (const auto& wv : waves) v += wv.amp * std::sin(2.0 * std::numbers::pi * (wv.fr * r + wv.fc * c) + wv.phase);
      tex[r * spec.width + c] = v;
    }
  return tex;
}

}  // namespace

PhantomPair make_phantom_pair(const PhantomSpec& spec) {
  spec.validate();
  const auto field = make_smooth_field(spec);
  JacobianMap jmap = jacobian_determinant(field);
  const std::int64_t h = spec.height, w = spec.width;

  if (spec.num_blobs > 0) {
    // Field structure plus a ventral-dorsal gradient (larger expansion in
    // higher rows), rescaled to the severity's target mean and SD.
    std::vector<double> z = jmap.values;
    standardize(z);
    std::vector<double> grad(z.size());
    for (std::int64_t r = 0; r < h; ++r)
      for (std::int64_t c = 0; c < w; ++c) grad[r * w + c] = static_cast<double>(r);
    standardize(grad);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += kGradientWeight * grad[i];
    standardize(z);
    const double m = target_mean_j(spec.severity), s = target_sd_j(spec.severity);
    jmap.non_positive = 0;
    for (std::size_t i = 0; i < z.size(); ++i) jmap.values[i] = std::max(kMinJacobian, m + s * z[i]);
  }

  const auto texture = make_texture(spec);
  std::mt19937_64 rng(derive_seed(spec.seed, kNoiseStream));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<float> image(static_cast<std::size_t>(h * w));
  for (std::size_t i = 0; i < image.size(); ++i) {
    double v = intensity_from_j(jmap.values[i]) + texture[i];
    if (spec.noise_sd > 0.0) v += spec.noise_sd * noise(rng);
    image[i] = static_cast<float>(v);
  }
  PhantomPair pair{Tensor::from_data({h, w}, std::move(image)), std::move(jmap),
                   Tensor::from_data({h, w}, std::vector<float>(texture.begin(), texture.end()))};
  return pair;
}

}  // namespace jexpand::phantom
