#include "jexpand/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>

#include "jexpand/error.hpp"
#include "jexpand/losses.hpp"
#include "jexpand/ops.hpp"
#include "jexpand/random.hpp"

namespace jexpand::grad {

namespace {

constexpr double kStep = 0.03;
constexpr double kKinkGap = 0.1;  // > 2 * kStep

using Rng = std::mt19937_64;
using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

struct Case {
  std::vector<Tensor> inputs;  // all differentiable
  Fn f;
};

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Values in [-scale, scale]; with `gap` > 0, also |v| >= gap so piecewise
// ops are never probed across their kink.
Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0, double gap = 0.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) {
    double r = u(rng) * scale;
    if (gap > 0.0) r = std::copysign(gap + std::abs(r) * (1.0 - gap / scale), r == 0.0 ? 1.0 : r);
    x = static_cast<float>(r);
  }
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

Tensor positive_tensor(Rng& rng, Shape shape, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = static_cast<float>(u(rng));
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

Shape image_shape(Rng& rng, int min_hw = 2, int max_hw = 6) {
  return {uniform_int(rng, 1, 2), uniform_int(rng, 1, 3), uniform_int(rng, min_hw, max_hw),
          uniform_int(rng, min_hw, max_hw)};
}

// Scalar losses are means, so their gradients shrink with the element
// count while float rounding of the loss value does not; keep them small.
Shape loss_shape(Rng& rng) {
  return {uniform_int(rng, 1, 2), uniform_int(rng, 1, 2), uniform_int(rng, 2, 5), uniform_int(rng, 2, 5)};
}

Case unary(Rng& rng, std::function<Tensor(const Tensor&)> op, double gap = 0.0) {
  return {{random_tensor(rng, image_shape(rng), 2.0, gap)}, [op](const std::vector<Tensor>& in) { return op(in[0]); }};
}

// Residual target = pred + r with |r| >= kKinkGap, so |pred - target| stays off
// the kink of L1-like losses.
Tensor offset_target(Rng& rng, const Tensor& pred) {
  Tensor r = random_tensor(rng, pred.shape(), 1.0, kKinkGap);
  std::vector<float> v(pred.data().begin(), pred.data().end());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += r.data()[i];
  return Tensor::from_data(pred.shape(), std::move(v));
}

using Builder = std::function<Case(Rng&)>;

const std::map<std::string, Builder>& builders() {
  static const std::map<std::string, Builder> table = {
      {"add", [](Rng& r) {
         const Shape s = image_shape(r);
         return Case{{random_tensor(r, s), random_tensor(r, s)}, [](const auto& in) { return add(in[0], in[1]); }};
       }},
      {"sub", [](Rng& r) {
         const Shape s = image_shape(r);
         return Case{{random_tensor(r, s), random_tensor(r, s)}, [](const auto& in) { return sub(in[0], in[1]); }};
       }},
      {"mul", [](Rng& r) {
         const Shape s = image_shape(r);
         return Case{{random_tensor(r, s), random_tensor(r, s)}, [](const auto& in) { return mul(in[0], in[1]); }};
       }},
      {"div", [](Rng& r) {
         const Shape s = image_shape(r);
         return Case{{random_tensor(r, s), random_tensor(r, s, 2.0, 1.0)}, [](const auto& in) { return div(in[0], in[1]); }};
       }},
      {"add_scalar", [](Rng& r) { return unary(r, [](const Tensor& t) { return add_scalar(t, 0.7f); }); }},
      {"mul_scalar", [](Rng& r) { return unary(r, [](const Tensor& t) { return mul_scalar(t, -1.3f); }); }},
      {"neg", [](Rng& r) { return unary(r, [](const Tensor& t) { return neg(t); }); }},
      {"square", [](Rng& r) { return unary(r, [](const Tensor& t) { return square(t); }); }},
      {"sqrt", [](Rng& r) {
         return Case{{positive_tensor(r, image_shape(r), 0.5, 2.0)}, [](const auto& in) { return sqrt(in[0]); }};
       }},
      {"abs", [](Rng& r) { return unary(r, [](const Tensor& t) { return abs(t); }, kKinkGap); }},
      {"relu", [](Rng& r) { return unary(r, [](const Tensor& t) { return relu(t); }, kKinkGap); }},
      {"leaky_relu", [](Rng& r) { return unary(r, [](const Tensor& t) { return leaky_relu(t, 0.2f); }, kKinkGap); }},
      {"tanh", [](Rng& r) { return unary(r, [](const Tensor& t) { return tanh(t); }); }},
      {"sigmoid", [](Rng& r) { return unary(r, [](const Tensor& t) { return sigmoid(t); }); }},
      {"softplus", [](Rng& r) { return unary(r, [](const Tensor& t) { return softplus(t); }); }},
      {"pseudo_huber", [](Rng& r) { return unary(r, [](const Tensor& t) { return pseudo_huber(t, 0.5); }); }},
      {"sum", [](Rng& r) { return unary(r, [](const Tensor& t) { return sum(t); }); }},
      {"mean", [](Rng& r) { return unary(r, [](const Tensor& t) { return mean(t); }); }},
      {"mean_per_sample", [](Rng& r) { return unary(r, [](const Tensor& t) { return mean_per_sample(t); }); }},
      {"reshape", [](Rng& r) {
         return unary(r, [](const Tensor& t) { return t.reshape({t.numel()}); });
       }},
      {"concat_channels", [](Rng& r) {
         Shape a = image_shape(r), b = a;
         b[1] = uniform_int(r, 1, 3);
         return Case{{random_tensor(r, a), random_tensor(r, b)},
                     [](const auto& in) { return concat_channels(in[0], in[1]); }};
       }},
      {"index_select", [](Rng& r) {
         Shape s = image_shape(r);
         s[0] = 4;
         std::vector<std::int64_t> idx{3, 1, uniform_int(r, 0, 3)};
         return Case{{random_tensor(r, s)}, [idx](const auto& in) { return index_select(in[0], idx); }};
       }},
      {"pad2d", [](Rng& r) {
         Padding2d p{uniform_int(r, 0, 2), uniform_int(r, 0, 2), uniform_int(r, 0, 2), uniform_int(r, 0, 2)};
         return unary(r, [p](const Tensor& t) { return pad2d(t, p, -1.0f); });
       }},
      {"crop2d", [](Rng& r) {
         const Shape s = image_shape(r, 4, 7);
         const int top = uniform_int(r, 0, 2), left = uniform_int(r, 0, 2);
         const std::int64_t h = s[2] - top - uniform_int(r, 0, 1), w = s[3] - left - uniform_int(r, 0, 1);
         return Case{{random_tensor(r, s)}, [=](const auto& in) { return crop2d(in[0], top, left, h, w); }};
       }},
      {"conv2d", [](Rng& r) {
         const int k = uniform_int(r, 1, 4), stride = uniform_int(r, 1, 2), pad = uniform_int(r, 0, std::min(2, k - 1));
         Shape x = image_shape(r, std::max(k, 3), 7);
         const std::int64_t f = uniform_int(r, 1, 3);
         return Case{{random_tensor(r, x), random_tensor(r, {f, x[1], k, k}, 0.5), random_tensor(r, {f}, 0.5)},
                     [=](const auto& in) { return conv2d(in[0], in[1], in[2], stride, pad); }};
       }},
      {"conv_transpose2d", [](Rng& r) {
         const int k = uniform_int(r, 2, 4), stride = uniform_int(r, 1, 2), pad = uniform_int(r, 0, 1);
         Shape x = image_shape(r, 2, 5);
         const std::int64_t co = uniform_int(r, 1, 3);
         return Case{{random_tensor(r, x), random_tensor(r, {x[1], co, k, k}, 0.5), random_tensor(r, {co}, 0.5)},
                     [=](const auto& in) { return conv_transpose2d(in[0], in[1], in[2], stride, pad); }};
       }},
      {"instance_norm", [](Rng& r) {
         Shape x = image_shape(r, 2, 5);
         return Case{{random_tensor(r, x), random_tensor(r, {x[1]}), random_tensor(r, {x[1]})},
                     [](const auto& in) { return instance_norm(in[0], in[1], in[2]); }};
       }},
      {"batch_norm", [](Rng& r) {
         Shape x = image_shape(r, 2, 5);
         auto stats = std::make_shared<RunningStats>();
         return Case{{random_tensor(r, x), random_tensor(r, {x[1]}), random_tensor(r, {x[1]})},
                     [stats](const auto& in) { return batch_norm(in[0], in[1], in[2], *stats, true); }};
       }},
      {"charbonnier", [](Rng& r) {
         const Tensor pred = random_tensor(r, loss_shape(r));
         const Tensor target = offset_target(r, pred);
         const double eps = std::array<double, 3>{1e-6, 0.1, 1.0}[static_cast<std::size_t>(uniform_int(r, 0, 2))];
         return Case{{pred}, [target, eps](const auto& in) { return losses::charbonnier(in[0], target, eps); }};
       }},
      {"charbonnier_per_sample", [](Rng& r) {
         const Tensor pred = random_tensor(r, loss_shape(r));
         const Tensor target = offset_target(r, pred);
         return Case{{pred}, [target](const auto& in) { return losses::charbonnier_per_sample(in[0], target, 1e-6); }};
       }},
      {"lsgan_d_loss", [](Rng& r) {
         const Shape s = loss_shape(r);
         return Case{{random_tensor(r, s), random_tensor(r, s)},
                     [](const auto& in) { return losses::lsgan_d_loss(in[0], in[1]); }};
       }},
      {"lsgan_g_adv_loss", [](Rng& r) {
         return Case{{random_tensor(r, loss_shape(r))}, [](const auto& in) { return losses::lsgan_g_adv_loss(in[0]); }};
       }},
      {"generator_total_loss", [](Rng& r) {
         Shape s = loss_shape(r);
         s[1] = 1;
         const Tensor pred = random_tensor(r, s);
         const Tensor target = offset_target(r, pred);
         return Case{{random_tensor(r, {s[0], 1, 2, 2}), pred}, [target](const auto& in) {
                       return losses::generator_total_loss(in[0], in[1], target, {2.0f, 1e-6, losses::ReconKind::charbonnier}).total;
                     }};
       }},
      {"l1_loss", [](Rng& r) {
         const Tensor pred = random_tensor(r, loss_shape(r));
         const Tensor target = offset_target(r, pred);
         return Case{{pred}, [target](const auto& in) { return losses::l1_loss(in[0], target); }};
       }},
      {"ssim_loss", [](Rng& r) {
         const Shape s{uniform_int(r, 1, 2), 1, uniform_int(r, 12, 16), uniform_int(r, 12, 16)};
         return Case{{random_tensor(r, s), random_tensor(r, s)},
                     [](const auto& in) { return losses::ssim_loss(in[0], in[1]); }};
       }},
      {"bce_d_loss", [](Rng& r) {
         const Shape s = loss_shape(r);
         return Case{{random_tensor(r, s, 3.0), random_tensor(r, s, 3.0)},
                     [](const auto& in) { return losses::bce_d_loss(in[0], in[1]); }};
       }},
      {"bce_g_loss", [](Rng& r) {
         return Case{{random_tensor(r, loss_shape(r), 3.0)}, [](const auto& in) { return losses::bce_g_loss(in[0]); }};
       }},
  };
  return table;
}

double objective(const Tensor& y, const std::vector<float>& w) {
  double acc = 0.0;
  const auto v = y.data();
  for (std::size_t i = 0; i < v.size(); ++i) acc += static_cast<double>(w[i]) * v[i];
  return acc;
}

double check_case(Case c, Rng& rng) {
  const Tensor y0 = [&] {
    NoGradGuard no_grad;
    return c.f(c.inputs);
  }();
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> w(static_cast<std::size_t>(y0.numel()));
  for (auto& x : w) x = u(rng);

  for (auto& t : c.inputs) t.zero_grad();
  c.f(c.inputs).backward(w);

  double worst = 0.0;
  for (auto& t : c.inputs) {
    std::vector<double> analytic(static_cast<std::size_t>(t.numel()), 0.0), numeric(analytic.size());
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    auto values = t.mutable_data();
    NoGradGuard no_grad;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float original = values[i];
      auto at = [&](double offset) {
        values[i] = static_cast<float>(original + offset);
        return objective(c.f(c.inputs), w);
      };
      const double f2 = at(2 * kStep), f1 = at(kStep), m1 = at(-kStep), m2 = at(-2 * kStep);
      values[i] = original;
      numeric[i] = (-f2 + 8.0 * f1 - 8.0 * m1 + m2) / (12.0 * kStep);
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double scale = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
    worst = std::max(worst, std::sqrt(diff) / scale);
  }
  return worst;
}

}  // namespace

const std::vector<std::string>& gradcheck_ops() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, _] : builders()) n.push_back(name);
    return n;
  }();
  return names;
}

GradcheckResult run_gradcheck(const std::string& op, std::uint64_t seed, int trials, double tolerance) {
  const auto it = builders().find(op);
  if (it == builders().end()) throw InvalidArgument("gradcheck: unknown op '" + op + "'");
  if (trials < 1) throw InvalidArgument("gradcheck: trials must be >= 1");
  GradcheckResult result;
  result.op = op;
  result.trials = trials;
  result.tolerance = tolerance;
  const auto index = static_cast<std::uint64_t>(std::find(gradcheck_ops().begin(), gradcheck_ops().end(), op) -
                                                gradcheck_ops().begin());
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(derive_seed(seed, index), static_cast<std::uint64_t>(t)));
    result.max_rel_error = std::max(result.max_rel_error, check_case(it->second(rng), rng));
  }
  result.passed = result.max_rel_error < tolerance;
  return result;
}

std::vector<GradcheckResult> run_all(std::uint64_t seed, int trials, double tolerance) {
  std::vector<GradcheckResult> out;
  for (const auto& op : gradcheck_ops()) out.push_back(run_gradcheck(op, seed, trials, tolerance));
  return out;
}

}  // namespace jexpand::grad
