#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "jexpand/dataset.hpp"
#include "jexpand/networks.hpp"
#include "jexpand/tensor.hpp"
#include "jexpand/trainer.hpp"

namespace testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("jexpand_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline jexpand::Tensor uniform(const jexpand::Shape& shape, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f,
                               bool requires_grad = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> v(static_cast<std::size_t>(jexpand::shape_numel(shape)));
  for (auto& x : v) x = dist(rng);
  return jexpand::Tensor::from_data(shape, std::move(v), requires_grad);
}

inline std::vector<float> values(const jexpand::Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline double max_abs_diff(const jexpand::Tensor& a, const jexpand::Tensor& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double m = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, double(std::abs(a.data()[i] - b.data()[i])));
  return m;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Every regular file under `dir` keyed by relative path.
inline std::vector<std::pair<std::string, std::string>> read_tree(const std::filesystem::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.emplace_back(std::filesystem::relative(e.path(), dir).string(), read_file(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// 16x16 networks that train in milliseconds.
inline jexpand::nets::ModelSpec tiny_spec(jexpand::nets::ModelKind kind) {
  jexpand::nets::GeneratorConfig g;
  g.depth = 2;
  g.base_channels = 4;
  g.slice_size = 16;
  jexpand::nets::DiscriminatorConfig d;
  d.num_layers = 1;
  d.base_channels = 4;
  return jexpand::nets::build_baseline(kind, g, d);
}

inline jexpand::train::TrainConfig tiny_train(jexpand::nets::ModelKind kind, int epochs, int batch = 4,
                                              std::uint64_t seed = 5) {
  jexpand::train::TrainConfig c;
  c.epochs = epochs;
  c.batch_size = batch;
  c.seed = seed;
  c.model_kind = kind;
  c.drs_enabled = kind == jexpand::nets::ModelKind::ours_drs;
  return c;
}

// Pairs whose target is a smooth function of the input, so a generator has
// something to learn.
inline std::vector<jexpand::SamplePair> synthetic_pairs(int n, std::int64_t size = 16, std::uint64_t seed = 3) {
  std::vector<jexpand::SamplePair> out;
  for (int i = 0; i < n; ++i) {
    jexpand::Tensor x = uniform({size, size}, seed * 1000 + i, -0.8f, 0.8f);
    std::vector<float> y(x.data().begin(), x.data().end());
    for (auto& v : y) v = 0.5f * v - 0.1f;
    jexpand::SamplePair p;
    p.x = x;
    p.y = jexpand::Tensor::from_data({size, size}, std::move(y));
    p.id = "s" + std::to_string(i);
    p.severity_tag = i % 2 ? "low" : "high";
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace testing
