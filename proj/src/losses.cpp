#include "jexpand/losses.hpp"

#include "jexpand/error.hpp"
#include "jexpand/ops.hpp"

namespace jexpand::losses {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor charbonnier(const Tensor& pred, const Tensor& target, double eps) {
  require_same_shape(pred, target, "charbonnier");
  return mean(pseudo_huber(sub(target, pred), eps));
}

Tensor charbonnier_per_sample(const Tensor& pred, const Tensor& target, double eps) {
  require_same_shape(pred, target, "charbonnier");
  return mean_per_sample(pseudo_huber(sub(target, pred), eps));
}

Tensor lsgan_d_loss(const Tensor& score_real, const Tensor& score_fake) {
  require_same_shape(score_real, score_fake, "lsgan_d_loss");
  return add(mean(square(add_scalar(score_real, -1.0f))), mean(square(score_fake)));
}

Tensor lsgan_g_adv_loss(const Tensor& score_fake) { return mean(square(add_scalar(score_fake, -1.0f))); }

GeneratorLoss generator_total_loss(const Tensor& score_fake, const Tensor& pred, const Tensor& target,
                                   const LossWeights& weights) {
  require_same_shape(pred, target, "generator_total_loss");
  if (score_fake.dim(0) != pred.dim(0)) throw ShapeError("generator_total_loss: batch axis mismatch");
  if (weights.lambda_recon < 0.0f) throw InvalidArgument("lambda must be >= 0");
  const Tensor adv_map = square(add_scalar(score_fake, -1.0f));
  const Tensor rho = pseudo_huber(sub(target, pred), weights.eps_charbonnier);

  GeneratorLoss out;
  out.adversarial = mean(adv_map);
  out.reconstruction = mean(rho);
  out.total = add(out.adversarial, mul_scalar(out.reconstruction, weights.lambda_recon));
  out.per_sample = add(mean_per_sample(adv_map), mul_scalar(mean_per_sample(rho), weights.lambda_recon));
  return out;
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "l1_loss");
  return mean(abs(sub(pred, target)));
}

Tensor ssim_value(const Tensor& pred, const Tensor& target, const metrics::SsimParams& params) {
  require_same_shape(pred, target, "ssim");
  if (pred.ndim() != 4) throw ShapeError("ssim: expects [N,C,H,W], got " + shape_to_string(pred.shape()));
  const std::int64_t planes = pred.dim(0) * pred.dim(1), h = pred.dim(2), w = pred.dim(3);
  if (h < params.window || w < params.window) throw InvalidArgument("ssim: image smaller than window");

  const Shape plane_shape{planes, 1, h, w};
  const Tensor x = pred.reshape(plane_shape);
  const Tensor y = target.reshape(plane_shape);
  const auto window = metrics::gaussian_window(params.window, params.sigma);
  const Tensor kernel = Tensor::from_data({1, 1, params.window, params.window}, std::vector<float>(window.begin(), window.end()));
  const Tensor none;
  auto blur = [&](const Tensor& t) { return conv2d(t, kernel, none, 1, 0); };

  const Tensor mx = blur(x), my = blur(y);
  const Tensor mx2 = square(mx), my2 = square(my), mxy = mul(mx, my);
  const Tensor vx = sub(blur(square(x)), mx2);
  const Tensor vy = sub(blur(square(y)), my2);
  const Tensor cxy = sub(blur(mul(x, y)), mxy);
  const auto c1 = static_cast<float>(params.c1()), c2 = static_cast<float>(params.c2());
  const Tensor num = mul(add_scalar(mul_scalar(mxy, 2.0f), c1), add_scalar(mul_scalar(cxy, 2.0f), c2));
  const Tensor den = mul(add_scalar(add(mx2, my2), c1), add_scalar(add(vx, vy), c2));
  return mean(div(num, den));
}

Tensor ssim_loss(const Tensor& pred, const Tensor& target, const metrics::SsimParams& params) {
  return add_scalar(neg(ssim_value(pred, target, params)), 1.0f);
}

// -log(sigmoid(s)) = softplus(-s); -log(1 - sigmoid(s)) = softplus(s).
Tensor bce_d_loss(const Tensor& score_real, const Tensor& score_fake) {
  return add(mean(softplus(neg(score_real))), mean(softplus(score_fake)));
}

Tensor bce_g_loss(const Tensor& score_fake) { return mean(softplus(neg(score_fake))); }

BceLosses bce_adv_losses(const Tensor& score_real, const Tensor& score_fake) {
  return {bce_d_loss(score_real, score_fake), bce_g_loss(score_fake)};
}

}  // namespace jexpand::losses
