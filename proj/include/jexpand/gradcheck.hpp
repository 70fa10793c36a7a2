#pragma once

// Finite-difference verification of every differentiable operation.
//
// For each trial an op gets random inputs, the objective is sum(w * y) for
// a random weight tensor w, and the analytic gradient of every input is
// compared with the four-point central difference
//   (-f(x+2h) + 8 f(x+h) - 8 f(x-h) + f(x-2h)) / 12h,  h = 0.03
// by ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-12).
// Piecewise-linear ops are probed at least 0.1 away from their kinks.

#include <cstdint>
#include <string>
#include <vector>

namespace jexpand::grad {

struct GradcheckResult {
  std::string op;
  int trials = 0;
  double max_rel_error = 0.0;
  double tolerance = 1e-3;
  bool passed = false;
};

/// Names accepted by run_gradcheck.
const std::vector<std::string>& gradcheck_ops();

/// Throws InvalidArgument for an unknown op name.
GradcheckResult run_gradcheck(const std::string& op, std::uint64_t seed, int trials = 5, double tolerance = 1e-3);

std::vector<GradcheckResult> run_all(std::uint64_t seed, int trials = 5, double tolerance = 1e-3);

}  // namespace jexpand::grad
