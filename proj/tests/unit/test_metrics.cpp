#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "jexpand/error.hpp"
#include "jexpand/metrics.hpp"
#include "oracles.hpp"

using namespace jexpand;
using namespace jexpand::metrics;

namespace {

std::vector<double> as_double(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("ssim matches a literal sliding-window implementation") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor a = testing::uniform({16, 16}, 2 * seed), b = testing::uniform({16, 16}, 2 * seed + 1);
    CHECK(std::abs(ssim(a, b) - oracle::ssim(as_double(a), as_double(b), 16, 16)) < 1e-6);
  }
  const Tensor a = testing::uniform({1, 1, 24, 19}, 99);
  const Tensor b = testing::uniform({1, 1, 24, 19}, 98);
  CHECK(std::abs(ssim(a, b) - oracle::ssim(as_double(a), as_double(b), 24, 19)) < 1e-6);
  CHECK(ssim(a, a) == doctest::Approx(1.0));
  CHECK_THROWS_AS(ssim(testing::uniform({8, 8}, 1), testing::uniform({8, 8}, 2)), InvalidArgument);
}

TEST_CASE("gaussian window is normalized and symmetric") {
  const auto g = gaussian_window(11, 1.5);
  double s = 0;
  for (double v : g) s += v;
  CHECK(s == doctest::Approx(1.0));
  CHECK(g[0] == doctest::Approx(g[120]));
  CHECK(g[60] > g[59]);
}

TEST_CASE("psnr and mae") {
  const std::vector<float> a{0, 0, 0, 0}, b{1, 1, 1, 1};
  CHECK(psnr(a, b, 2.0).db == doctest::Approx(10 * std::log10(4.0)));
  CHECK(psnr(a, a, 2.0).infinite);
  CHECK(std::isinf(psnr(a, a, 2.0).db));
  CHECK(mae(a, b) == 1.0);
}

TEST_CASE("spearman anchors") {
  const std::vector<float> x{1, 2, 3}, y{1, 3, 2};
  REQUIRE(spearman(x, y).has_value());
  CHECK(*spearman(x, y) == doctest::Approx(0.5));
  CHECK(*spearman(x, x) == doctest::Approx(1.0));
  CHECK_FALSE(spearman(x, std::vector<float>{2, 2, 2}).has_value());
  const std::vector<float> t{1, 2, 2, 3};
  CHECK(average_ranks(std::vector<double>{1, 2, 2, 3}) == std::vector<double>{1, 2.5, 2.5, 4});
  CHECK(*spearman(t, std::vector<float>{4, 3, 3, 1}) == doctest::Approx(-1.0));
}

TEST_CASE("dsc_high equals brute force on random 8x8 pairs") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> level(0, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> a(64), b(64);
    std::vector<double> da(64), db(64);
    // Half the trials use a few levels so ties hit the threshold.
    for (int i = 0; i < 64; ++i) {
      a[i] = trial % 2 ? float(level(rng)) : float(rng() % 1000) / 1000.0f;
      b[i] = trial % 2 ? float(level(rng)) : float(rng() % 1000) / 1000.0f;
      da[i] = a[i];
      db[i] = b[i];
    }
    CHECK(dsc_high(a, b) == oracle::dsc_high(da, db));
  }
  const std::vector<float> flat(64, 1.0f);
  CHECK(dsc_high(flat, flat) == 1.0);
}

TEST_CASE("quantile interpolates order statistics") {
  CHECK(quantile_linear({4, 1, 3, 2}, 0.5) == 2.5);
  CHECK(quantile_linear({1, 2, 3, 4, 5}, 0.75) == 4.0);
  CHECK(quantile_linear({7}, 0.3) == 7.0);
}

TEST_CASE("global stats are population moments") {
  const auto g = global_stats(std::vector<float>{1, 3});
  CHECK(g.mean == 2.0);
  CHECK(g.sd == 1.0);
}

TEST_CASE("mann-whitney exact anchor") {
  const std::vector<double> x{1, 2}, y{3, 4};
  const auto r = mann_whitney_u(x, y);
  CHECK(r.exact);
  CHECK(r.u == 0.0);
  CHECK(r.p_value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("mann-whitney exact p equals enumeration") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const int na = 1 + trial % 6, nb = 1 + (trial / 6) % 6;
    std::vector<double> a(na), b(nb);
    for (auto& v : a) v = u(rng) + 0.3 * (trial % 3);
    for (auto& v : b) v = u(rng);
    const auto r = mann_whitney_u(a, b, UTestMethod::exact);
    CHECK(r.p_value == doctest::Approx(oracle::mann_whitney_exact_p(a, b)).epsilon(1e-12));
    double ua = 0;
    for (double p : a)
      for (double q : b) ua += p > q;
    CHECK(r.u == ua);
  }
}

TEST_CASE("normal approximation tracks the exact test") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(6), b(6);
    for (auto& v : a) v = u(rng) + 0.1 * trial;
    for (auto& v : b) v = u(rng);
    const double pe = mann_whitney_u(a, b, UTestMethod::exact).p_value;
    const double pn = mann_whitney_u(a, b, UTestMethod::normal).p_value;
    CHECK(std::abs(pe - pn) < 0.02);
  }
  std::vector<double> a(7), b(7);
  for (int i = 0; i < 7; ++i) {
    a[i] = i;
    b[i] = i + 0.5;
  }
  CHECK_FALSE(mann_whitney_u(a, b).exact);
  CHECK(mann_whitney_u(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}).exact);
  // Ties force the normal approximation.
  CHECK_FALSE(mann_whitney_u(std::vector<double>{1, 2}, std::vector<double>{2, 3}).exact);
  CHECK_THROWS(mann_whitney_u(std::vector<double>{}, std::vector<double>{1}));
}

TEST_CASE("significance markers follow the table thresholds") {
  // Every exact p attainable with small samples, plus boundary values.
  std::vector<double> ps{0.0, 0.00009999, 0.0001, 0.005, 0.00999, 0.01, 0.5, 1.0};
  for (int na = 1; na <= 6; ++na) {
    for (int nb = 1; nb <= 6; ++nb) {
      std::vector<double> a, b;
      for (int i = 0; i < na; ++i) a.push_back(i + nb);  // all of a above b
      for (int i = 0; i < nb; ++i) b.push_back(i);
      ps.push_back(oracle::mann_whitney_exact_p(a, b));
    }
  }
  for (double p : ps) {
    const std::string expect = p < 0.0001 ? "**" : (p < 0.01 ? "*" : "");
    CHECK(std::string(significance_marker(p)) == expect);
  }
}
