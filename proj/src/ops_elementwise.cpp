#include <algorithm>
#include <cmath>

#include "jexpand/error.hpp"
#include "jexpand/ops.hpp"

namespace jexpand {

using detail::Node;
using detail::NodePtr;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

// f(x) -> y, df(x, y) -> dy/dx
template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df) {
  auto x = a.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  NodePtr src = a.node();
  return detail::make_result(a.shape(), std::move(out), {a}, [src, df](Node& o) {
    auto g = src->grad_buffer();
    const auto& xv = src->data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * df(xv[i], o.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  NodePtr na = a.node(), nb = b.node();
  return detail::make_result(a.shape(), std::move(out), {a, b}, [na, nb](Node& o) {
    for (const auto& n : {na, nb}) {
      if (!n->requires_grad) continue;
      auto g = n->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  NodePtr na = a.node(), nb = b.node();
  return detail::make_result(a.shape(), std::move(out), {a, b}, [na, nb](Node& o) {
    if (na->requires_grad) {
      auto g = na->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (nb->requires_grad) {
      auto g = nb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  NodePtr na = a.node(), nb = b.node();
  return detail::make_result(a.shape(), std::move(out), {a, b}, [na, nb](Node& o) {
    if (na->requires_grad) {
      auto g = na->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * nb->data[i];
    }
    if (nb->requires_grad) {
      auto g = nb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * na->data[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / y[i];
  NodePtr na = a.node(), nb = b.node();
  return detail::make_result(a.shape(), std::move(out), {a, b}, [na, nb](Node& o) {
    if (na->requires_grad) {
      auto g = na->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] / nb->data[i];
    }
    if (nb->requires_grad) {
      auto g = nb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i] * o.data[i] / nb->data[i];
    }
  });
}

Tensor add_scalar(const Tensor& a, float s) {
  return unary(a, [s](float x) { return x + s; }, [](float, float) { return 1.0f; });
}

Tensor mul_scalar(const Tensor& a, float s) {
  return unary(a, [s](float x) { return x * s; }, [s](float, float) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0f); }

Tensor square(const Tensor& a) {
  return unary(a, [](float x) { return x * x; }, [](float x, float) { return 2.0f * x; });
}

Tensor sqrt(const Tensor& a) {
  for (float v : a.data()) {
    if (v < 0.0f) throw InvalidArgument("sqrt of negative value");
  }
  return unary(a, [](float x) { return std::sqrt(x); }, [](float, float y) { return 0.5f / y; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, [](float x) { return std::fabs(x); },
      [](float x, float) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](float x) { return x > 0.0f ? x : 0.0f; },
               [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

Tensor leaky_relu(const Tensor& a, float slope) {
  return unary(
      a, [slope](float x) { return x > 0.0f ? x : slope * x; },
      [slope](float x, float) { return x > 0.0f ? 1.0f : (x < 0.0f ? slope : 0.0f); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](float x) { return std::tanh(x); }, [](float, float y) { return 1.0f - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](float x) {
        if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
        float e = std::exp(x);
        return e / (1.0f + e);
      },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a,
      [](float x) {
        double xd = x;
        return static_cast<float>(std::max(xd, 0.0) + std::log1p(std::exp(-std::fabs(xd))));
      },
      [](float x, float) {
        double xd = x;
        double s = xd >= 0 ? 1.0 / (1.0 + std::exp(-xd)) : std::exp(xd) / (1.0 + std::exp(xd));
        return static_cast<float>(s);
      });
}

Tensor pseudo_huber(const Tensor& t, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("pseudo_huber: eps must be > 0");
  const double eps2 = eps * eps;
  return unary(
      t,
      [eps2](float x) {
        double xd = x;
        return static_cast<float>(std::sqrt(xd * xd + eps2));
      },
      [eps2](float x, float) {
        double xd = x;
        return static_cast<float>(xd / std::sqrt(xd * xd + eps2));
      });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  NodePtr src = a.node();
  return detail::make_result({1}, {static_cast<float>(acc)}, {a}, [src](Node& o) {
    auto g = src->grad_buffer();
    const float go = o.grad[0];
    for (auto& v : g) v += go;
  });
}

Tensor mean(const Tensor& a) {
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  const double n = static_cast<double>(a.numel());
  NodePtr src = a.node();
  return detail::make_result({1}, {static_cast<float>(acc / n)}, {a}, [src, n](Node& o) {
    auto g = src->grad_buffer();
    const float go = static_cast<float>(o.grad[0] / n);
    for (auto& v : g) v += go;
  });
}

Tensor mean_per_sample(const Tensor& a) {
  if (a.ndim() < 1) throw ShapeError("mean_per_sample needs at least one axis");
  const std::int64_t n = a.dim(0);
  const std::int64_t m = a.numel() / n;
  auto x = a.data();
  std::vector<float> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::int64_t j = 0; j < m; ++j) acc += x[i * m + j];
    out[i] = static_cast<float>(acc / static_cast<double>(m));
  }
  NodePtr src = a.node();
  return detail::make_result({n}, std::move(out), {a}, [src, n, m](Node& o) {
    auto g = src->grad_buffer();
    for (std::int64_t i = 0; i < n; ++i) {
      const float go = static_cast<float>(o.grad[i] / static_cast<double>(m));
      for (std::int64_t j = 0; j < m; ++j) g[i * m + j] += go;
    }
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 4 || b.ndim() != 4) throw ShapeError("concat_channels expects 4-d tensors");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: axes N,H,W must agree, got " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()));
  }
  const std::int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  std::vector<float> out(static_cast<std::size_t>(n * (ca + cb) * hw));
  auto x = a.data(), y = b.data();
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy_n(x.begin() + i * ca * hw, ca * hw, out.begin() + i * (ca + cb) * hw);
    std::copy_n(y.begin() + i * cb * hw, cb * hw, out.begin() + i * (ca + cb) * hw + ca * hw);
  }
  NodePtr na = a.node(), nb = b.node();
  return detail::make_result({n, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b},
                             [na, nb, n, ca, cb, hw](Node& o) {
                               for (std::int64_t i = 0; i < n; ++i) {
                                 const float* go = o.grad.data() + i * (ca + cb) * hw;
                                 if (na->requires_grad) {
                                   auto g = na->grad_buffer();
                                   for (std::int64_t j = 0; j < ca * hw; ++j) g[i * ca * hw + j] += go[j];
                                 }
                                 if (nb->requires_grad) {
                                   auto g = nb->grad_buffer();
                                   for (std::int64_t j = 0; j < cb * hw; ++j)
                                     g[i * cb * hw + j] += go[ca * hw + j];
                                 }
                               }
                             });
}

Tensor index_select(const Tensor& a, const std::vector<std::int64_t>& indices) {
  if (a.ndim() < 1) throw ShapeError("index_select needs at least one axis");
  if (indices.empty()) throw InvalidArgument("index_select with no indices");
  const std::int64_t rows = a.dim(0);
  const std::int64_t m = a.numel() / rows;
  for (auto idx : indices) {
    if (idx < 0 || idx >= rows) throw InvalidArgument("index_select: index out of range");
  }
  Shape shape = a.shape();
  shape[0] = static_cast<std::int64_t>(indices.size());
  std::vector<float> out(static_cast<std::size_t>(shape_numel(shape)));
  auto x = a.data();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy_n(x.begin() + indices[r] * m, m, out.begin() + static_cast<std::int64_t>(r) * m);
  }
  NodePtr src = a.node();
  return detail::make_result(std::move(shape), std::move(out), {a}, [src, indices, m](Node& o) {
    auto g = src->grad_buffer();
    for (std::size_t r = 0; r < indices.size(); ++r) {
      for (std::int64_t j = 0; j < m; ++j) g[indices[r] * m + j] += o.grad[r * m + j];
    }
  });
}

Tensor pad2d(const Tensor& a, Padding2d p, float value) {
  if (a.ndim() < 2) throw ShapeError("pad2d needs at least two axes");
  if (p.top < 0 || p.bottom < 0 || p.left < 0 || p.right < 0) {
    throw InvalidArgument("pad2d: negative padding");
  }
  const std::size_t nd = a.ndim();
  const std::int64_t h = a.dim(nd - 2), w = a.dim(nd - 1);
  const std::int64_t planes = a.numel() / (h * w);
  const std::int64_t ho = h + p.top + p.bottom, wo = w + p.left + p.right;
  Shape shape = a.shape();
  shape[nd - 2] = ho;
  shape[nd - 1] = wo;
  std::vector<float> out(static_cast<std::size_t>(planes * ho * wo), value);
  auto x = a.data();
  for (std::int64_t k = 0; k < planes; ++k) {
    for (std::int64_t r = 0; r < h; ++r) {
      std::copy_n(x.begin() + (k * h + r) * w, w, out.begin() + (k * ho + r + p.top) * wo + p.left);
    }
  }
  NodePtr src = a.node();
  return detail::make_result(std::move(shape), std::move(out), {a}, [src, p, planes, h, w, ho, wo](Node& o) {
    auto g = src->grad_buffer();
    for (std::int64_t k = 0; k < planes; ++k)
      for (std::int64_t r = 0; r < h; ++r)
        for (std::int64_t c = 0; c < w; ++c)
          g[(k * h + r) * w + c] += o.grad[(k * ho + r + p.top) * wo + c + p.left];
  });
}

Tensor crop2d(const Tensor& a, std::int64_t top, std::int64_t left, std::int64_t height,
              std::int64_t width) {
  if (a.ndim() < 2) throw ShapeError("crop2d needs at least two axes");
  const std::size_t nd = a.ndim();
  const std::int64_t h = a.dim(nd - 2), w = a.dim(nd - 1);
  if (top < 0 || left < 0 || height <= 0 || width <= 0 || top + height > h || left + width > w) {
    throw InvalidArgument("crop2d: window outside the input extent " + shape_to_string(a.shape()));
  }
  const std::int64_t planes = a.numel() / (h * w);
  Shape shape = a.shape();
  shape[nd - 2] = height;
  shape[nd - 1] = width;
  std::vector<float> out(static_cast<std::size_t>(planes * height * width));
  auto x = a.data();
  for (std::int64_t k = 0; k < planes; ++k)
    for (std::int64_t r = 0; r < height; ++r)
      std::copy_n(x.begin() + (k * h + r + top) * w + left, width, out.begin() + (k * height + r) * width);
  NodePtr src = a.node();
  return detail::make_result(std::move(shape), std::move(out), {a},
                             [src, top, left, height, width, planes, h, w](Node& o) {
                               auto g = src->grad_buffer();
                               for (std::int64_t k = 0; k < planes; ++k)
                                 for (std::int64_t r = 0; r < height; ++r)
                                   for (std::int64_t c = 0; c < width; ++c)
                                     g[(k * h + r + top) * w + c + left] += o.grad[(k * height + r) * width + c];
                             });
}

}  // namespace jexpand
