#include <doctest.h>

#include <algorithm>
#include <chrono>

#include "jexpand/error.hpp"
#include "jexpand/gradcheck.hpp"

using namespace jexpand::grad;

TEST_CASE("every differentiable op passes the finite-difference check") {
  const auto start = std::chrono::steady_clock::now();
  const auto results = run_all(2024, 5, 1e-3);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(results.size() == gradcheck_ops().size());
  for (const auto& r : results) {
    INFO(r.op << " max rel err " << r.max_rel_error);
    CHECK(r.passed);
    CHECK(r.trials == 5);
    CHECK(r.max_rel_error < 1e-3);
  }
  CHECK(seconds < 60.0);
}

TEST_CASE("the suite covers the required operators") {
  const auto& ops = gradcheck_ops();
  for (const char* name : {"conv2d", "conv_transpose2d", "instance_norm", "batch_norm", "relu", "leaky_relu", "tanh",
                           "sigmoid", "charbonnier", "lsgan_d_loss", "lsgan_g_adv_loss", "ssim_loss"}) {
    CHECK(std::find(ops.begin(), ops.end(), name) != ops.end());
  }
}

TEST_CASE("other seeds pass too") {
  for (std::uint64_t seed : {1u, 77u}) {
    for (const char* op : {"conv2d", "instance_norm", "batch_norm", "ssim_loss", "charbonnier"}) {
      CHECK(run_gradcheck(op, seed).passed);
    }
  }
}

TEST_CASE("a zero tolerance fails and unknown ops are rejected") {
  CHECK_FALSE(run_gradcheck("tanh", 1, 2, 0.0).passed);
  CHECK_THROWS_AS(run_gradcheck("fft", 1), jexpand::InvalidArgument);
}
