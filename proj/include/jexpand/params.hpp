#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "jexpand/tensor.hpp"

namespace jexpand {

/// Named, ordered collection of trainable leaf tensors. Iteration order is
/// the lexicographic name order, which fixes the update order everywhere.
class ParamSet {
 public:
  using Map = std::map<std::string, Tensor>;

  void add(const std::string& name, Tensor tensor);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  void zero_grad();
  void set_requires_grad(bool flag);
  /// Total number of scalar parameters.
  std::int64_t count() const;
  /// Copy of every parameter value, concatenated in name order.
  std::vector<float> flatten() const;

 private:
  Map params_;
};

struct AdamConfig {
  float lr = 2e-4f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct AdamState {
  AdamConfig config;
  std::map<std::string, std::vector<float>> first_moment;
  std::map<std::string, std::vector<float>> second_moment;
  std::int64_t step_count = 0;
  std::int64_t skipped_steps = 0;
};

/// One bias-corrected Adam update from the gradients stored on `params`
/// (a parameter without a gradient counts as zero gradient). If any gradient
/// is non-finite the update is skipped, `skipped_steps` is incremented, a
/// warning is logged, and false is returned.
bool adam_step(ParamSet& params, AdamState& state);

}  // namespace jexpand
