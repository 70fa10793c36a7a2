#pragma once

#include "jexpand/metrics.hpp"
#include "jexpand/tensor.hpp"

namespace jexpand::losses {

enum class ReconKind { charbonnier, l1, ssim_l1 };

struct LossWeights {
  float lambda_recon = 200.0f;
  double eps_charbonnier = 1e-6;
  ReconKind recon = ReconKind::charbonnier;
};

/// Mean over every element of sqrt((target - pred)^2 + eps^2).
Tensor charbonnier(const Tensor& pred, const Tensor& target, double eps);
/// Per-sample Charbonnier, shape [N].
Tensor charbonnier_per_sample(const Tensor& pred, const Tensor& target, double eps);

/// mean((real - 1)^2) + mean(fake^2); minimized by the discriminator.
Tensor lsgan_d_loss(const Tensor& score_real, const Tensor& score_fake);
/// mean((fake - 1)^2).
Tensor lsgan_g_adv_loss(const Tensor& score_fake);

struct GeneratorLoss {
  Tensor total;           // adversarial + lambda * charbonnier
  Tensor per_sample;      // [N], batch mean equals `total`
  Tensor adversarial;
  Tensor reconstruction;  // un-weighted charbonnier
};

/// LSGAN adversarial term plus lambda-weighted Charbonnier term.
GeneratorLoss generator_total_loss(const Tensor& score_fake, const Tensor& pred, const Tensor& target,
                                   const LossWeights& weights);

Tensor l1_loss(const Tensor& pred, const Tensor& target);

/// Differentiable mean SSIM over a batch [N,C,H,W] of planes, with the
/// window and constants of metrics::ssim.
Tensor ssim_value(const Tensor& pred, const Tensor& target, const metrics::SsimParams& params = {});
/// 1 - ssim_value.
Tensor ssim_loss(const Tensor& pred, const Tensor& target, const metrics::SsimParams& params = {});

/// Sigmoid cross-entropy on raw scores (labels: real 1, fake 0).
Tensor bce_d_loss(const Tensor& score_real, const Tensor& score_fake);
/// Sigmoid cross-entropy with label 1 on fakes.
Tensor bce_g_loss(const Tensor& score_fake);

struct BceLosses {
  Tensor d_loss;
  Tensor g_loss;
};
BceLosses bce_adv_losses(const Tensor& score_real, const Tensor& score_fake);

}  // namespace jexpand::losses
