#include <cmath>

#include "jexpand/error.hpp"
#include "jexpand/ops.hpp"

namespace jexpand {

using detail::Node;
using detail::NodePtr;

namespace {

// A normalization group is a set of `segments` contiguous runs of `len`
// values spaced `stride` apart. Instance norm: one run per (n,c). Batch
// norm: N runs per channel. With N == 1 both visit values in the same order,
// so the two normalizations agree bit-for-bit on a single sample.
struct Group {
  std::int64_t offset, segments, stride, len;
  template <typename F>
  void for_each(F&& f) const {
    for (std::int64_t s = 0; s < segments; ++s) {
      const std::int64_t base = offset + s * stride;
      for (std::int64_t i = 0; i < len; ++i) f(base + i);
    }
  }
  double count() const { return static_cast<double>(segments * len); }
};

struct Moments {
  double mean, var;
};

Moments moments(const float* x, const Group& g) {
  double acc = 0.0;
  g.for_each([&](std::int64_t i) { acc += x[i]; });
  const double mean = acc / g.count();
  double sq = 0.0;
  g.for_each([&](std::int64_t i) {
    const double d = x[i] - mean;
    sq += d * d;
  });
  return {mean, sq / g.count()};
}

void check_norm_args(const Tensor& input, const Tensor& gamma, const Tensor& beta, float eps, const char* op) {
  if (input.ndim() != 4) throw ShapeError(std::string(op) + ": input must be [N,C,H,W], got " + shape_to_string(input.shape()));
  const std::int64_t c = input.dim(1);
  if (gamma.ndim() != 1 || gamma.dim(0) != c || beta.ndim() != 1 || beta.dim(0) != c) {
    throw ShapeError(std::string(op) + ": gamma/beta must be [" + std::to_string(c) + "]");
  }
  if (!(eps > 0.0f)) throw InvalidArgument(std::string(op) + ": eps must be > 0 (division guard)");
}

// Shared forward/backward for both normalizations. `channel_of(g)` maps a
// group index to its channel for gamma/beta lookup.
Tensor normalize_groups(const Tensor& input, const Tensor& gamma, const Tensor& beta, std::vector<Group> groups,
                        std::vector<std::int64_t> channel_of, const std::vector<Moments>& stats, float eps,
                        bool stats_depend_on_input) {
  const float* x = input.data().data();
  auto gm = gamma.data();
  auto bt = beta.data();
  std::vector<float> out(input.data().size());
  auto xhat = std::make_shared<std::vector<float>>(out.size());
  std::vector<double> inv_std(groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    inv_std[gi] = 1.0 / std::sqrt(stats[gi].var + static_cast<double>(eps));
    const double mean = stats[gi].mean, is = inv_std[gi];
    const float gmv = gm[channel_of[gi]], btv = bt[channel_of[gi]];
    groups[gi].for_each([&](std::int64_t i) {
      const float xh = static_cast<float>((x[i] - mean) * is);
      (*xhat)[i] = xh;
      out[i] = gmv * xh + btv;
    });
  }

  NodePtr ni = input.node(), ng = gamma.node(), nb = beta.node();
  return detail::make_result(
      input.shape(), std::move(out), {input, gamma, beta},
      [ni, ng, nb, groups = std::move(groups), channel_of = std::move(channel_of), inv_std = std::move(inv_std), xhat,
       stats_depend_on_input](Node& o) {
        const float* go = o.grad.data();
        const auto& xh = *xhat;
        std::vector<double> dgamma(ng->data.size(), 0.0), dbeta(nb->data.size(), 0.0);
        // Batch-norm groups share a channel, so accumulate per channel first.
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
          const auto c = channel_of[gi];
          groups[gi].for_each([&](std::int64_t i) {
            dgamma[c] += static_cast<double>(go[i]) * xh[i];
            dbeta[c] += go[i];
          });
        }
        if (ni->requires_grad) {
          auto gx = ni->grad_buffer();
          for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            const auto& grp = groups[gi];
            const double gmv = ng->data[channel_of[gi]];
            const double is = inv_std[gi];
            if (!stats_depend_on_input) {
              grp.for_each([&](std::int64_t i) { gx[i] += static_cast<float>(go[i] * gmv * is); });
              continue;
            }
            double sum_d = 0.0, sum_dx = 0.0;
            grp.for_each([&](std::int64_t i) {
              const double d = go[i] * gmv;
              sum_d += d;
              sum_dx += d * xh[i];
            });
            const double m = grp.count();
            grp.for_each([&](std::int64_t i) {
              const double d = go[i] * gmv;
              gx[i] += static_cast<float>(is / m * (m * d - sum_d - xh[i] * sum_dx));
            });
          }
        }
        if (ng->requires_grad) {
          auto gg = ng->grad_buffer();
          for (std::size_t c = 0; c < gg.size(); ++c) gg[c] += static_cast<float>(dgamma[c]);
        }
        if (nb->requires_grad) {
          auto gb = nb->grad_buffer();
          for (std::size_t c = 0; c < gb.size(); ++c) gb[c] += static_cast<float>(dbeta[c]);
        }
      });
}

}  // namespace

Tensor instance_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, float eps) {
  check_norm_args(input, gamma, beta, eps, "instance_norm");
  const std::int64_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (hw < 2) throw ShapeError("instance_norm: needs H*W >= 2, got " + shape_to_string(input.shape()));
  std::vector<Group> groups;
  std::vector<std::int64_t> channel_of;
  std::vector<Moments> stats;
  const float* x = input.data().data();
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t ch = 0; ch < c; ++ch) {
      groups.push_back({(b * c + ch) * hw, 1, 0, hw});
      channel_of.push_back(ch);
      stats.push_back(moments(x, groups.back()));
    }
  return normalize_groups(input, gamma, beta, std::move(groups), std::move(channel_of), stats, eps, true);
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, RunningStats& running, bool training,
                  float eps) {
  check_norm_args(input, gamma, beta, eps, "batch_norm");
  const std::int64_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  std::vector<Group> groups;
  std::vector<std::int64_t> channel_of;
  std::vector<Moments> stats;
  for (std::int64_t ch = 0; ch < c; ++ch) {
    groups.push_back({ch * hw, n, c * hw, hw});
    channel_of.push_back(ch);
  }
  if (training) {
    if (n * hw < 2) throw ShapeError("batch_norm: needs N*H*W >= 2 in training mode");
    const float* x = input.data().data();
    for (const auto& g : groups) stats.push_back(moments(x, g));
    if (!running.initialized) {
      running.mean.resize(c);
      running.var.resize(c);
      for (std::int64_t ch = 0; ch < c; ++ch) {
        running.mean[ch] = static_cast<float>(stats[ch].mean);
        running.var[ch] = static_cast<float>(stats[ch].var);
      }
      running.initialized = true;
    } else {
      const float m = running.momentum;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        running.mean[ch] = (1.0f - m) * running.mean[ch] + m * static_cast<float>(stats[ch].mean);
        running.var[ch] = (1.0f - m) * running.var[ch] + m * static_cast<float>(stats[ch].var);
      }
    }
    return normalize_groups(input, gamma, beta, std::move(groups), std::move(channel_of), stats, eps, true);
  }
  if (!running.initialized) {
    throw ValidationError("batch_norm: eval mode before any training-mode statistics update");
  }
  if (static_cast<std::int64_t>(running.mean.size()) != c) throw ShapeError("batch_norm: running stats channel mismatch");
  for (std::int64_t ch = 0; ch < c; ++ch) stats.push_back({running.mean[ch], running.var[ch]});
  return normalize_groups(input, gamma, beta, std::move(groups), std::move(channel_of), stats, eps, false);
}

}  // namespace jexpand
