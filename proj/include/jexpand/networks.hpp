#pragma once

// Generator (UNet-style encoder/decoder with skip connections) and
// conditional patch discriminator, plus the model presets compared in the
// evaluation (UNet with SSIM loss, Pix2Pix, cLSGAN, cLSGAN with top-k).

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "jexpand/losses.hpp"
#include "jexpand/ops.hpp"
#include "jexpand/params.hpp"

namespace jexpand::nets {

enum class NormKind { instance, batch, none };

std::string to_string(NormKind kind);
NormKind norm_kind_from_string(const std::string& name);

struct GeneratorConfig {
  int depth = 4;
  int base_channels = 32;
  NormKind norm = NormKind::instance;
  int in_channels = 1;
  int out_channels = 1;
  int slice_size = 64;
  int kernel = 4;
  float leaky_slope = 0.2f;

  /// depth >= 2, slice_size divisible by 2^depth, channels positive.
  void validate() const;
  /// Channels of encoder level i: base * 2^min(i, 3).
  int level_channels(int level) const;
};

struct DiscriminatorConfig {
  int num_layers = 3;  // 3 gives the 70x70 receptive field
  int base_channels = 64;
  NormKind norm = NormKind::instance;
  int in_channels = 2;
  int kernel = 4;
  float leaky_slope = 0.2f;

  void validate() const;
  int level_channels(int level) const;
  /// Receptive field of one output score, in input pixels.
  int receptive_field() const;
};

/// Trainable parameters, batch-norm running statistics and the seed they
/// were initialized from.
struct NetworkParams {
  ParamSet params;
  std::map<std::string, RunningStats> buffers;
  std::uint64_t seed = 0;
};

class Generator {
 public:
  /// Weights ~ N(0, 0.02^2), biases 0, norm scale 1 and shift 0, drawn in
  /// a fixed order from `seed`.
  Generator(GeneratorConfig config, std::uint64_t seed);

  /// x: [N, in_channels, S, S] -> [N, out_channels, S, S] in (-1, 1).
  /// `training` only matters for batch norm.
  Tensor forward(const Tensor& x, bool training = true);

  const GeneratorConfig& config() const { return config_; }
  NetworkParams& params() { return params_; }
  const NetworkParams& params() const { return params_; }

  static std::int64_t parameter_count(const GeneratorConfig& config);

 private:
  Tensor normalize(const std::string& prefix, const Tensor& t, bool training);

  GeneratorConfig config_;
  NetworkParams params_;
};

class Discriminator {
 public:
  Discriminator(DiscriminatorConfig config, std::uint64_t seed);

  /// Concatenates (x, y) on the channel axis and returns the raw patch
  /// score map [N, 1, h, w] (no sigmoid).
  Tensor forward(const Tensor& x, const Tensor& y, bool training = true);

  const DiscriminatorConfig& config() const { return config_; }
  NetworkParams& params() { return params_; }
  const NetworkParams& params() const { return params_; }

  static std::int64_t parameter_count(const DiscriminatorConfig& config);
  /// Score-map extent for an input of the given size.
  static std::int64_t output_extent(const DiscriminatorConfig& config, std::int64_t input_extent);

 private:
  Tensor normalize(const std::string& prefix, const Tensor& t, bool training);

  DiscriminatorConfig config_;
  NetworkParams params_;
};

enum class ModelKind { unet_ssim, pix2pix, ours, ours_drs };
enum class AdversarialKind { none, lsgan, bce };

std::string to_string(ModelKind kind);
/// Throws InvalidArgument for an unknown name.
ModelKind model_kind_from_string(const std::string& name);

/// Complete model + loss configuration for one of the compared methods.
struct ModelSpec {
  ModelKind kind = ModelKind::ours_drs;
  GeneratorConfig generator;
  std::optional<DiscriminatorConfig> discriminator;
  losses::LossWeights loss;
  AdversarialKind adversarial = AdversarialKind::lsgan;
  bool drs = false;
};

/// unet_ssim: generator only, (1 - SSIM) + L1.
/// pix2pix:   batch-norm networks, sigmoid cross-entropy, L1 with lambda 100.
/// ours:      instance-norm networks, LSGAN, Charbonnier with lambda 200.
/// ours_drs:  ours plus top-k generator updates.
/// Sizes (depth, widths, slice) are taken from the given base configs.
ModelSpec build_baseline(ModelKind kind, const GeneratorConfig& generator = {},
                         const DiscriminatorConfig& discriminator = {});

}  // namespace jexpand::nets
