#pragma once

// Brute-force reference implementations the library is checked against.
// Written for clarity, not speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "jexpand/phantom.hpp"

namespace oracle {

// Literal sliding-window SSIM: every fully contained 11x11 window, Gaussian
// weights (sigma 1.5) built from scratch, statistics summed term by term.
inline double ssim(const std::vector<double>& x, const std::vector<double>& y, int h, int w, double range = 2.0) {
  const int win = 11;
  const double sigma = 1.5;
  std::vector<double> g(win * win);
  double total = 0.0;
  for (int i = 0; i < win; ++i) {
    for (int j = 0; j < win; ++j) {
      const double di = i - win / 2, dj = j - win / 2;
      g[i * win + j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      total += g[i * win + j];
    }
  }
  for (auto& v : g) v /= total;
  const double c1 = (0.01 * range) * (0.01 * range), c2 = (0.03 * range) * (0.03 * range);
  double acc = 0.0;
  int count = 0;
  for (int r = 0; r + win <= h; ++r) {
    for (int c = 0; c + win <= w; ++c) {
      double mx = 0, my = 0;
      for (int i = 0; i < win; ++i) {
        for (int j = 0; j < win; ++j) {
          mx += g[i * win + j] * x[(r + i) * w + c + j];
          my += g[i * win + j] * y[(r + i) * w + c + j];
        }
      }
      double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < win; ++i) {
        for (int j = 0; j < win; ++j) {
          const double dx = x[(r + i) * w + c + j] - mx, dy = y[(r + i) * w + c + j] - my;
          vx += g[i * win + j] * dx * dx;
          vy += g[i * win + j] * dy * dy;
          cxy += g[i * win + j] * dx * dy;
        }
      }
      acc += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return acc / count;
}

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double dsc_high(const std::vector<double>& a, const std::vector<double>& b, double q = 0.75) {
  const double ta = quantile(a, q), tb = quantile(b, q);
  int na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ma = a[i] > ta, mb = b[i] > tb;
    na += ma;
    nb += mb;
    both += ma && mb;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * both / (na + nb);
}

// Two-sided exact Mann-Whitney p by enumerating every assignment of the
// pooled ranks to sample a (no ties).
inline double mann_whitney_exact_p(const std::vector<double>& a, const std::vector<double>& b) {
  const int na = static_cast<int>(a.size()), n = na + static_cast<int>(b.size());
  double u_obs = 0;
  for (double x : a) {
    for (double y : b) u_obs += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  std::vector<int> pick(n, 0);
  std::fill(pick.begin(), pick.begin() + na, 1);
  std::sort(pick.begin(), pick.end());
  long long le = 0, ge = 0, total = 0;
  do {
    // Pooled order is rank order; a "1" at position i is an a-sample with rank i.
    double u = 0;
    int a_seen = 0;
    for (int i = 0; i < n; ++i) {
      if (pick[i]) {
        ++a_seen;
      } else {
        u += a_seen;
      }
    }
    u = static_cast<double>(na) * (n - na) - u;
    le += u <= u_obs + 1e-9;
    ge += u >= u_obs - 1e-9;
    ++total;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return std::min(1.0, 2.0 * std::min(le, ge) / static_cast<double>(total));
}

inline std::vector<std::int64_t> top_k(const std::vector<double>& scores, int k) {
  std::vector<std::pair<double, std::int64_t>> v;
  for (std::size_t i = 0; i < scores.size(); ++i) v.emplace_back(-scores[i], static_cast<std::int64_t>(i));
  std::sort(v.begin(), v.end());
  std::vector<std::int64_t> out;
  for (int i = 0; i < k; ++i) out.push_back(v[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

// det(I + du/dp) from the continuous field with a tiny central step.
inline double fine_jacobian(const jexpand::phantom::DeformationField& f, double row, double col, double h = 1e-4) {
  const auto up = f.evaluate({row + h, col}), dn = f.evaluate({row - h, col});
  const auto rt = f.evaluate({row, col + h}), lf = f.evaluate({row, col - h});
  const double a = 1 + (up[0] - dn[0]) / (2 * h), b = (rt[0] - lf[0]) / (2 * h);
  const double c = (up[1] - dn[1]) / (2 * h), d = 1 + (rt[1] - lf[1]) / (2 * h);
  return a * d - b * c;
}

}  // namespace oracle
