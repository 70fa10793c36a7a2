#pragma once

// Differentiable operators. Elementwise binary ops require identical shapes;
// the only broadcasting is tensor-with-scalar through the *_scalar variants.

#include <cstdint>
#include <vector>

#include "jexpand/tensor.hpp"

namespace jexpand {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, float s);
Tensor mul_scalar(const Tensor& a, float s);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);  // subgradient 0 at 0

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, float slope);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// log(1 + exp(a)), evaluated without overflow for large |a|.
Tensor softplus(const Tensor& a);
/// sqrt(t^2 + eps^2) per element, computed in double precision.
Tensor pseudo_huber(const Tensor& t, double eps);

/// Reductions accumulate in double in a fixed sequential order.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Mean over every axis but the first: [N, ...] -> [N].
Tensor mean_per_sample(const Tensor& a);

/// [N,C1,H,W] ++ [N,C2,H,W] -> [N,C1+C2,H,W]
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Rows along axis 0 in the given order (indices may repeat).
Tensor index_select(const Tensor& a, const std::vector<std::int64_t>& indices);

struct Padding2d {
  std::int64_t top = 0, bottom = 0, left = 0, right = 0;
};
/// Constant padding of the last two axes.
Tensor pad2d(const Tensor& a, Padding2d padding, float value);
/// Window [top, top+height) x [left, left+width) of the last two axes.
Tensor crop2d(const Tensor& a, std::int64_t top, std::int64_t left, std::int64_t height,
              std::int64_t width);

/// input [N,C,H,W], weight [F,C,kH,kW], bias [F] or undefined.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad);
/// Adjoint of conv2d with the same weight: input [N,F,H,W] -> [N,C,H',W'],
/// H' = (H-1)*stride - 2*pad + kH. bias [C] or undefined.
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                        int pad);

/// Per (sample, channel) normalization with biased variance. eps must be > 0.
Tensor instance_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

struct RunningStats {
  std::vector<float> mean;
  std::vector<float> var;
  bool initialized = false;
  float momentum = 0.1f;
};

/// Training mode normalizes with the batch statistics over N*H*W and
/// updates `stats` (the first update copies the batch statistics). Eval mode
/// uses `stats` and throws ValidationError if they were never populated.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, RunningStats& stats,
                  bool training, float eps = 1e-5f);

}  // namespace jexpand
