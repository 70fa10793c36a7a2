#include "jexpand/params.hpp"

#include <cmath>

#include "jexpand/error.hpp"
#include "jexpand/log.hpp"

namespace jexpand {

void ParamSet::add(const std::string& name, Tensor tensor) {
  if (!tensor.defined()) throw InvalidArgument("ParamSet::add: undefined tensor for " + name);
  if (!params_.emplace(name, std::move(tensor)).second) {
    throw InvalidArgument("duplicate parameter name: " + name);
  }
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidArgument("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidArgument("unknown parameter: " + name);
  return it->second;
}

void ParamSet::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

void ParamSet::set_requires_grad(bool flag) {
  for (auto& [_, t] : params_) t.set_requires_grad(flag);
}

std::int64_t ParamSet::count() const {
  std::int64_t n = 0;
  for (const auto& [_, t] : params_) n += t.numel();
  return n;
}

std::vector<float> ParamSet::flatten() const {
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(count()));
  for (const auto& [_, t] : params_) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

bool adam_step(ParamSet& params, AdamState& state) {
  for (const auto& [name, t] : params) {
    for (float g : t.grad()) {
      if (!std::isfinite(g)) {
        ++state.skipped_steps;
        log::warn("adam: non-finite gradient in '" + name + "', update skipped (" +
                  std::to_string(state.skipped_steps) + " skipped so far)");
        return false;
      }
    }
  }

  const auto& cfg = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), t);
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), t);

  for (auto& [name, p] : params) {
    const auto n = static_cast<std::size_t>(p.numel());
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.empty()) m.assign(n, 0.0f);
    if (v.empty()) v.assign(n, 0.0f);
    if (m.size() != n || v.size() != n) throw ShapeError("adam: moment buffer shape mismatch for " + name);
    auto grad = p.grad();
    auto data = p.mutable_data();
    for (std::size_t i = 0; i < n; ++i) {
      const float g = grad.empty() ? 0.0f : grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      data[i] -= static_cast<float>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
  return true;
}

}  // namespace jexpand
