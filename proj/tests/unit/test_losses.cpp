#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "jexpand/error.hpp"
#include "jexpand/losses.hpp"
#include "jexpand/metrics.hpp"
#include "jexpand/ops.hpp"

using namespace jexpand;
using namespace jexpand::losses;
using testing::uniform;

TEST_CASE("charbonnier of identical tensors is eps") {
  const Tensor a = uniform({2, 1, 8, 8}, 1);
  CHECK(charbonnier(a, a, 1e-6).item() == 1e-6f);
  CHECK(charbonnier(a, a, 0.25).item() == 0.25f);
  const Tensor ps = charbonnier_per_sample(a, a, 1e-6);
  CHECK(ps.shape() == Shape{2});
  CHECK(ps.data()[1] == 1e-6f);
}

TEST_CASE("charbonnier approaches l1 for large residuals") {
  const Tensor p = Tensor::full({4}, 3.0f), t = Tensor::full({4}, -1.0f);
  CHECK(charbonnier(p, t, 1e-6).item() == doctest::Approx(4.0));
  CHECK(charbonnier(p, t, 3.0).item() == doctest::Approx(5.0));
  CHECK(l1_loss(p, t).item() == doctest::Approx(4.0));
}

TEST_CASE("lsgan anchors") {
  const Tensor ones = Tensor::full({2, 1, 3, 3}, 1.0f), zeros = Tensor::zeros({2, 1, 3, 3});
  CHECK(lsgan_d_loss(ones, zeros).item() == 0.0f);
  CHECK(lsgan_d_loss(zeros, ones).item() == 2.0f);
  CHECK(lsgan_g_adv_loss(ones).item() == 0.0f);
  CHECK(lsgan_g_adv_loss(zeros).item() == 1.0f);
}

TEST_CASE("generator total loss: batch mean equals the scalar") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor score = uniform({4, 1, 6, 6}, seed, -1, 2);
    const Tensor pred = uniform({4, 1, 16, 16}, seed + 10), target = uniform({4, 1, 16, 16}, seed + 20);
    const auto l = generator_total_loss(score, pred, target, LossWeights{});
    REQUIRE(l.per_sample.shape() == Shape{4});
    double m = 0;
    for (float v : l.per_sample.data()) m += v;
    m /= 4;
    CHECK(std::abs(m - l.total.item()) < 1e-6 * std::max(1.0, std::abs(m)));
    const double expect = l.adversarial.item() + 200.0 * l.reconstruction.item();
    CHECK(l.total.item() == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("generator loss respects lambda") {
  const Tensor score = Tensor::full({1, 1, 2, 2}, 1.0f);
  const Tensor p = Tensor::full({1, 1, 4, 4}, 0.5f), t = Tensor::zeros({1, 1, 4, 4});
  LossWeights w;
  w.lambda_recon = 0.0f;
  CHECK(generator_total_loss(score, p, t, w).total.item() == 0.0f);
  w.lambda_recon = 2.0f;
  CHECK(generator_total_loss(score, p, t, w).total.item() == doctest::Approx(1.0));
}

TEST_CASE("differentiable ssim agrees with the metric") {
  const Tensor a = uniform({1, 1, 20, 20}, 3), b = uniform({1, 1, 20, 20}, 4);
  CHECK(ssim_value(a, b).item() == doctest::Approx(metrics::ssim(a, b)).epsilon(1e-5));
  CHECK(ssim_loss(a, a).item() == doctest::Approx(0.0).epsilon(1e-6));
  CHECK_THROWS(ssim_value(uniform({1, 1, 8, 8}, 1), uniform({1, 1, 8, 8}, 2)));
}

TEST_CASE("bce losses") {
  const Tensor big = Tensor::full({1, 1, 2, 2}, 30.0f), small = Tensor::full({1, 1, 2, 2}, -30.0f);
  CHECK(bce_d_loss(big, small).item() < 1e-6f);
  CHECK(bce_g_loss(big).item() < 1e-6f);
  CHECK(bce_g_loss(Tensor::zeros({1, 1, 2, 2})).item() == doctest::Approx(std::log(2.0)));
  const auto both = bce_adv_losses(Tensor::zeros({1, 1, 1, 1}), Tensor::zeros({1, 1, 1, 1}));
  CHECK(both.d_loss.item() == doctest::Approx(2 * std::log(2.0)));
}

TEST_CASE("charbonnier gradient is bounded near zero residual") {
  Tensor p = Tensor::from_data({2}, {0.0f, 1e-3f}, true);
  charbonnier(p, Tensor::zeros({2}), 1e-6).backward();
  CHECK(std::isfinite(p.grad()[0]));
  CHECK(p.grad()[0] == 0.0f);
  CHECK(p.grad()[1] == doctest::Approx(0.5).epsilon(1e-3));
}
