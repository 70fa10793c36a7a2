#include "jexpand/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "jexpand/error.hpp"

namespace jexpand::metrics {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": size mismatch " + std::to_string(a) + " vs " + std::to_string(b));
  }
  if (a == 0) throw InvalidArgument(std::string(op) + ": empty input");
}

std::vector<double> gaussian_1d(int window, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(window));
  const double c = (window - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < window; ++i) {
    g[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

// Valid-mode separable filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& img, std::int64_t h, std::int64_t w,
                                 const std::vector<double>& g) {
  const auto k = static_cast<std::int64_t>(g.size());
  const std::int64_t ho = h - k + 1, wo = w - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(h * wo));
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < wo; ++c) {
      double acc = 0.0;
      for (std::int64_t j = 0; j < k; ++j) acc += g[j] * img[r * w + c + j];
      rows[r * wo + c] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(ho * wo));
  for (std::int64_t r = 0; r < ho; ++r)
    for (std::int64_t c = 0; c < wo; ++c) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < k; ++i) acc += g[i] * rows[(r + i) * wo + c];
      out[r * wo + c] = acc;
    }
  return out;
}

}  // namespace

std::vector<double> gaussian_window(int window, double sigma) {
  if (window < 1 || !(sigma > 0)) throw InvalidArgument("gaussian_window: bad window/sigma");
  auto g = gaussian_1d(window, sigma);
  std::vector<double> out(static_cast<std::size_t>(window * window));
  for (int i = 0; i < window; ++i)
    for (int j = 0; j < window; ++j) out[i * window + j] = g[i] * g[j];
  return out;
}

Psnr psnr(std::span<const float> pred, std::span<const float> target, double peak) {
  require_same_size(pred.size(), target.size(), "psnr");
  if (!(peak > 0)) throw InvalidArgument("psnr: peak must be > 0");
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - target[i];
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(pred.size());
  if (mse == 0.0) return {std::numeric_limits<double>::infinity(), true};
  return {10.0 * std::log10(peak * peak / mse), false};
}

double mae(std::span<const float> pred, std::span<const float> target) {
  require_same_size(pred.size(), target.size(), "mae");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::fabs(static_cast<double>(pred[i]) - target[i]);
  return acc / static_cast<double>(pred.size());
}

double ssim(const Tensor& pred, const Tensor& target, const SsimParams& params) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("ssim: shape mismatch " + shape_to_string(pred.shape()) + " vs " + shape_to_string(target.shape()));
  }
  if (pred.ndim() < 2) throw ShapeError("ssim: needs [..., H, W]");
  const std::int64_t h = pred.dim(pred.ndim() - 2), w = pred.dim(pred.ndim() - 1);
  if (h * w != pred.numel()) throw ShapeError("ssim: expects a single image plane, got " + shape_to_string(pred.shape()));
  if (h < params.window || w < params.window) {
    throw InvalidArgument("ssim: image " + std::to_string(h) + "x" + std::to_string(w) + " smaller than the " +
                          std::to_string(params.window) + "x" + std::to_string(params.window) + " window");
  }
  const auto n = static_cast<std::size_t>(h * w);
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  auto pv = pred.data(), tv = target.data();
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = pv[i];
    y[i] = tv[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto g = gaussian_1d(params.window, params.sigma);
  auto mx = filter_valid(x, h, w, g), my = filter_valid(y, h, w, g);
  auto exx = filter_valid(xx, h, w, g), eyy = filter_valid(yy, h, w, g), exy = filter_valid(xy, h, w, g);
  const double c1 = params.c1(), c2 = params.c2();
  double acc = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = exx[i] - mx[i] * mx[i];
    const double vy = eyy[i] - my[i] * my[i];
    const double cxy = exy[i] - mx[i] * my[i];
    acc += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return acc / static_cast<double>(mx.size());
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of empty sample");
  if (q < 0.0 || q > 1.0) throw InvalidArgument("quantile level outside [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double dsc_high(std::span<const float> pred, std::span<const float> target, double q) {
  require_same_size(pred.size(), target.size(), "dsc_high");
  if (pred.empty()) throw InvalidArgument("dsc_high: no pixels");
  const double tp = quantile_linear(std::vector<double>(pred.begin(), pred.end()), q);
  const double tt = quantile_linear(std::vector<double>(target.begin(), target.end()), q);
  std::int64_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool ma = pred[i] > tp, mb = target[i] > tt;
    a += ma;
    b += mb;
    both += ma && mb;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman(std::span<const float> a, std::span<const float> b) {
  require_same_size(a.size(), b.size(), "spearman");
  if (a.size() < 2) throw InvalidArgument("spearman: needs at least 2 values");
  std::vector<double> da(a.begin(), a.end()), db(b.begin(), b.end());
  auto ra = average_ranks(da), rb = average_ranks(db);
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

GlobalStats global_stats(std::span<const float> values) {
  if (values.empty()) throw ValidationError("global_stats: empty mask");
  double acc = 0.0;
  for (float v : values) acc += v;
  const double mean = acc / static_cast<double>(values.size());
  double sq = 0.0;
  for (float v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

namespace {

// counts[u] = number of label assignments giving U = u, for sizes (na, nb).
std::vector<double> u_null_counts(int na, int nb) {
  // table[a][b] is the distribution for sizes (a, b); built bottom-up.
  std::vector<std::vector<std::vector<double>>> table(na + 1, std::vector<std::vector<double>>(nb + 1));
  for (int a = 0; a <= na; ++a)
    for (int b = 0; b <= nb; ++b) {
      auto& d = table[a][b];
      d.assign(static_cast<std::size_t>(a * b + 1), 0.0);
      if (a == 0 || b == 0) {
        d[0] = 1.0;
        continue;
      }
      // Largest observation belongs to sample A (beats all b) or to B.
      const auto& from_a = table[a - 1][b];
      const auto& from_b = table[a][b - 1];
      for (std::size_t u = 0; u < from_a.size(); ++u) d[u + b] += from_a[u];
      for (std::size_t u = 0; u < from_b.size(); ++u) d[u] += from_b[u];
    }
  return table[na][nb];
}

}  // namespace

UTestResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b, UTestMethod method) {
  if (sample_a.empty() || sample_b.empty()) throw InvalidArgument("mann_whitney_u: both samples must be nonempty");
  const auto na = sample_a.size(), nb = sample_b.size(), n = na + nb;
  std::vector<double> pooled(sample_a.begin(), sample_a.end());
  pooled.insert(pooled.end(), sample_b.begin(), sample_b.end());
  const auto ranks = average_ranks(pooled);
  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < na; ++i) rank_sum_a += ranks[i];
  UTestResult result;
  result.u = rank_sum_a - static_cast<double>(na) * (na + 1) / 2.0;

  // Tie groups from the sorted pooled sample.
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  bool has_ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    if (t > 1) has_ties = true;
    tie_term += t * t * t - t;
    i = j;
  }

  const bool use_exact =
      method == UTestMethod::exact || (method == UTestMethod::automatic && n <= 12 && !has_ties);
  if (use_exact) {
    if (has_ties) throw InvalidArgument("mann_whitney_u: exact method requires tie-free samples");
    const auto counts = u_null_counts(static_cast<int>(na), static_cast<int>(nb));
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto u = static_cast<std::size_t>(std::llround(result.u));
    double lower = 0.0, upper = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (k <= u) lower += counts[k];
      if (k >= u) upper += counts[k];
    }
    result.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / total);
    result.exact = true;
    return result;
  }

  const double dna = static_cast<double>(na), dnb = static_cast<double>(nb), dn = static_cast<double>(n);
  const double mu = dna * dnb / 2.0;
  const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(var > 0.0)) {
    result.p_value = 1.0;
    return result;
  }
  const double z = std::max(0.0, std::fabs(result.u - mu) - 0.5) / std::sqrt(var);
  result.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return result;
}

const char* significance_marker(double p_value) {
  if (p_value < 0.0001) return "**";
  if (p_value < 0.01) return "*";
  return "";
}

}  // namespace jexpand::metrics
