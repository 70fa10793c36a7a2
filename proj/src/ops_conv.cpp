// Convolutions lowered to im2col + GEMM. The column matrix covers the whole
// batch, [C*kH*kW, N*P], so deep layers with tiny spatial extent still give
// the GEMM a wide right-hand side.

#include <Eigen/Core>
#include <algorithm>
#include <cstring>

#include "jexpand/error.hpp"
#include "jexpand/ops.hpp"

namespace jexpand {

using detail::Node;
using detail::NodePtr;

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct Geometry {
  std::int64_t n, c, h, w;      // image side (conv input / transpose output)
  std::int64_t kh, kw;
  std::int64_t ho, wo;          // column side (conv output / transpose input)
  int stride, pad;
  std::int64_t k() const { return c * kh * kw; }
  std::int64_t p() const { return ho * wo; }
};

// col[(ci,ki,kj), (b,oy,ox)] = img[b,ci, oy*s-p+ki, ox*s-p+kj]
void im2col(const float* img, const Geometry& g, float* col) {
  const std::int64_t np = g.n * g.p();
  for (std::int64_t ci = 0; ci < g.c; ++ci) {
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        float* row = col + ((ci * g.kh + ki) * g.kw + kj) * np;
        for (std::int64_t b = 0; b < g.n; ++b) {
          const float* plane = img + (b * g.c + ci) * g.h * g.w;
          float* dst = row + b * g.p();
          for (std::int64_t oy = 0; oy < g.ho; ++oy) {
            const std::int64_t iy = oy * g.stride - g.pad + ki;
            float* drow = dst + oy * g.wo;
            if (iy < 0 || iy >= g.h) {
              std::fill_n(drow, g.wo, 0.0f);
              continue;
            }
            const float* srow = plane + iy * g.w;
            for (std::int64_t ox = 0; ox < g.wo; ++ox) {
              const std::int64_t ix = ox * g.stride - g.pad + kj;
              drow[ox] = (ix >= 0 && ix < g.w) ? srow[ix] : 0.0f;
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back onto the image.
void col2im(const float* col, const Geometry& g, float* img) {
  const std::int64_t np = g.n * g.p();
  for (std::int64_t ci = 0; ci < g.c; ++ci) {
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        const float* row = col + ((ci * g.kh + ki) * g.kw + kj) * np;
        for (std::int64_t b = 0; b < g.n; ++b) {
          float* plane = img + (b * g.c + ci) * g.h * g.w;
          const float* src = row + b * g.p();
          for (std::int64_t oy = 0; oy < g.ho; ++oy) {
            const std::int64_t iy = oy * g.stride - g.pad + ki;
            if (iy < 0 || iy >= g.h) continue;
            float* drow = plane + iy * g.w;
            const float* srow = src + oy * g.wo;
            for (std::int64_t ox = 0; ox < g.wo; ++ox) {
              const std::int64_t ix = ox * g.stride - g.pad + kj;
              if (ix >= 0 && ix < g.w) drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }
}

// [N, F, P] <-> [F, N*P]
void nfp_to_fnp(const float* src, std::int64_t n, std::int64_t f, std::int64_t p, float* dst) {
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t j = 0; j < f; ++j) std::memcpy(dst + (j * n + b) * p, src + (b * f + j) * p, p * sizeof(float));
}
void fnp_to_nfp(const float* src, std::int64_t n, std::int64_t f, std::int64_t p, float* dst) {
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t j = 0; j < f; ++j) std::memcpy(dst + (b * f + j) * p, src + (j * n + b) * p, p * sizeof(float));
}

void check_conv_args(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad,
                     std::int64_t weight_in_axis, std::int64_t bias_extent, const char* op) {
  if (input.ndim() != 4) throw ShapeError(std::string(op) + ": input must be [N,C,H,W], got " + shape_to_string(input.shape()));
  if (weight.ndim() != 4) throw ShapeError(std::string(op) + ": weight must be 4-d, got " + shape_to_string(weight.shape()));
  if (stride < 1) throw InvalidArgument(std::string(op) + ": stride must be >= 1");
  if (pad < 0) throw InvalidArgument(std::string(op) + ": pad must be >= 0");
  if (input.dim(1) != weight.dim(weight_in_axis)) {
    throw ShapeError(std::string(op) + ": channel axis mismatch, input axis 1 = " + std::to_string(input.dim(1)) +
                     ", weight axis " + std::to_string(weight_in_axis) + " = " +
                     std::to_string(weight.dim(weight_in_axis)));
  }
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != bias_extent)) {
    throw ShapeError(std::string(op) + ": bias must be [" + std::to_string(bias_extent) + "], got " +
                     shape_to_string(bias.shape()));
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad) {
  check_conv_args(input, weight, bias, stride, pad, 1, weight.dim(0), "conv2d");
  Geometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(2), weight.dim(3), 0, 0, stride, pad};
  if (g.kh > g.h + 2 * pad || g.kw > g.w + 2 * pad) {
    throw ShapeError("conv2d: kernel " + shape_to_string(weight.shape()) + " larger than padded input on axes H/W of " +
                     shape_to_string(input.shape()));
  }
  g.ho = (g.h + 2 * pad - g.kh) / stride + 1;
  g.wo = (g.w + 2 * pad - g.kw) / stride + 1;
  const std::int64_t f = weight.dim(0), k = g.k(), np = g.n * g.p();

  auto col = std::make_shared<std::vector<float>>(static_cast<std::size_t>(k * np));
  im2col(input.data().data(), g, col->data());

  std::vector<float> out_fnp(static_cast<std::size_t>(f * np));
  {
    MapMat out(out_fnp.data(), f, np);
    ConstMapMat w(weight.data().data(), f, k);
    ConstMapMat c(col->data(), k, np);
    out.noalias() = w * c;
  }
  if (bias.defined()) {
    auto bv = bias.data();
    for (std::int64_t j = 0; j < f; ++j) {
      float* row = out_fnp.data() + j * np;
      for (std::int64_t i = 0; i < np; ++i) row[i] += bv[j];
    }
  }
  std::vector<float> out(out_fnp.size());
  fnp_to_nfp(out_fnp.data(), g.n, f, g.p(), out.data());

  NodePtr ni = input.node(), nw = weight.node();
  NodePtr nb = bias.defined() ? bias.node() : nullptr;
  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return detail::make_result({g.n, f, g.ho, g.wo}, std::move(out), inputs, [ni, nw, nb, g, f, col](Node& o) {
    const std::int64_t k = g.k(), np = g.n * g.p();
    std::vector<float> gout(static_cast<std::size_t>(f * np));
    nfp_to_fnp(o.grad.data(), g.n, f, g.p(), gout.data());
    ConstMapMat go(gout.data(), f, np);
    if (nw->requires_grad) {
      MapMat gw(nw->grad_buffer().data(), f, k);
      gw.noalias() += go * ConstMapMat(col->data(), k, np).transpose();
    }
    if (nb && nb->requires_grad) {
      auto gb = nb->grad_buffer();
      for (std::int64_t j = 0; j < f; ++j) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < np; ++i) acc += gout[j * np + i];
        gb[j] += static_cast<float>(acc);
      }
    }
    if (ni->requires_grad) {
      std::vector<float> gcol(static_cast<std::size_t>(k * np));
      MapMat(gcol.data(), k, np).noalias() = ConstMapMat(nw->data.data(), f, k).transpose() * go;
      col2im(gcol.data(), g, ni->grad_buffer().data());
    }
  });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad) {
  check_conv_args(input, weight, bias, stride, pad, 0, weight.dim(1), "conv_transpose2d");
  // Image side of the geometry is the transpose output.
  Geometry g{input.dim(0), weight.dim(1), 0, 0, weight.dim(2), weight.dim(3), input.dim(2), input.dim(3), stride, pad};
  g.h = (g.ho - 1) * stride - 2 * pad + g.kh;
  g.w = (g.wo - 1) * stride - 2 * pad + g.kw;
  if (g.h <= 0 || g.w <= 0) {
    throw ShapeError("conv_transpose2d: empty output for input " + shape_to_string(input.shape()));
  }
  const std::int64_t fi = weight.dim(0), k = g.k(), np = g.n * g.p();

  auto in_fnp = std::make_shared<std::vector<float>>(static_cast<std::size_t>(fi * np));
  nfp_to_fnp(input.data().data(), g.n, fi, g.p(), in_fnp->data());
  std::vector<float> col(static_cast<std::size_t>(k * np));
  MapMat(col.data(), k, np).noalias() =
      ConstMapMat(weight.data().data(), fi, k).transpose() * ConstMapMat(in_fnp->data(), fi, np);
  std::vector<float> out(static_cast<std::size_t>(g.n * g.c * g.h * g.w), 0.0f);
  col2im(col.data(), g, out.data());
  if (bias.defined()) {
    auto bv = bias.data();
    const std::int64_t hw = g.h * g.w;
    for (std::int64_t b = 0; b < g.n; ++b)
      for (std::int64_t c = 0; c < g.c; ++c) {
        float* plane = out.data() + (b * g.c + c) * hw;
        for (std::int64_t i = 0; i < hw; ++i) plane[i] += bv[c];
      }
  }

  NodePtr ni = input.node(), nw = weight.node();
  NodePtr nb = bias.defined() ? bias.node() : nullptr;
  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return detail::make_result({g.n, g.c, g.h, g.w}, std::move(out), inputs, [ni, nw, nb, g, fi, in_fnp](Node& o) {
    const std::int64_t k = g.k(), np = g.n * g.p();
    std::vector<float> gcol(static_cast<std::size_t>(k * np));
    im2col(o.grad.data(), g, gcol.data());
    ConstMapMat gc(gcol.data(), k, np);
    if (nw->requires_grad) {
      MapMat gw(nw->grad_buffer().data(), fi, k);
      gw.noalias() += ConstMapMat(in_fnp->data(), fi, np) * gc.transpose();
    }
    if (nb && nb->requires_grad) {
      auto gb = nb->grad_buffer();
      const std::int64_t hw = g.h * g.w;
      for (std::int64_t c = 0; c < g.c; ++c) {
        double acc = 0.0;
        for (std::int64_t b = 0; b < g.n; ++b) {
          const float* plane = o.grad.data() + (b * g.c + c) * hw;
          for (std::int64_t i = 0; i < hw; ++i) acc += plane[i];
        }
        gb[c] += static_cast<float>(acc);
      }
    }
    if (ni->requires_grad) {
      std::vector<float> gin(static_cast<std::size_t>(fi * np));
      MapMat(gin.data(), fi, np).noalias() = ConstMapMat(nw->data.data(), fi, k) * gc;
      std::vector<float> gin_nfp(gin.size());
      fnp_to_nfp(gin.data(), g.n, fi, g.p(), gin_nfp.data());
      auto gi = ni->grad_buffer();
      for (std::size_t i = 0; i < gin_nfp.size(); ++i) gi[i] += gin_nfp[i];
    }
  });
}

}  // namespace jexpand
