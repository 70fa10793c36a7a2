#include "jexpand/networks.hpp"

#include <algorithm>
#include <random>

#include "jexpand/error.hpp"

namespace jexpand::nets {

namespace {

constexpr float kInitSd = 0.02f;
constexpr float kNormEps = 1e-5f;

Tensor gaussian(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, kInitSd);
  std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = dist(rng);
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

void add_conv(NetworkParams& p, const std::string& name, std::int64_t out, std::int64_t in, int k,
              std::mt19937_64& rng, bool transpose) {
  const Shape w = transpose ? Shape{in, out, k, k} : Shape{out, in, k, k};
  p.params.add(name + ".weight", gaussian(w, rng));
  p.params.add(name + ".bias", Tensor::zeros({out}, true));
}

void add_norm(NetworkParams& p, NormKind kind, const std::string& name, std::int64_t channels) {
  if (kind == NormKind::none) return;
  p.params.add(name + ".gamma", Tensor::full({channels}, 1.0f, true));
  p.params.add(name + ".beta", Tensor::zeros({channels}, true));
  if (kind == NormKind::batch) p.buffers[name] = RunningStats{};
}

Tensor apply_norm(NetworkParams& p, NormKind kind, const std::string& name, const Tensor& t, bool training) {
  switch (kind) {
    case NormKind::none:
      return t;
    case NormKind::instance:
      return instance_norm(t, p.params.at(name + ".gamma"), p.params.at(name + ".beta"), kNormEps);
    case NormKind::batch:
      return batch_norm(t, p.params.at(name + ".gamma"), p.params.at(name + ".beta"), p.buffers.at(name), training,
                        kNormEps);
  }
  return t;
}

std::int64_t norm_params(NormKind kind, std::int64_t channels) { return kind == NormKind::none ? 0 : 2 * channels; }

std::string enc(int i) { return "enc" + std::to_string(i); }
std::string dec(int i) { return "dec" + std::to_string(i); }
std::string disc(int i) { return "layer" + std::to_string(i); }

}  // namespace

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::instance: return "instance";
    case NormKind::batch: return "batch";
    case NormKind::none: return "none";
  }
  return "none";
}

NormKind norm_kind_from_string(const std::string& name) {
  if (name == "instance") return NormKind::instance;
  if (name == "batch") return NormKind::batch;
  if (name == "none") return NormKind::none;
  throw InvalidArgument("unknown norm kind '" + name + "'");
}

void GeneratorConfig::validate() const {
  if (depth < 2) throw ValidationError("generator depth must be >= 2");
  if (base_channels < 1 || in_channels < 1 || out_channels < 1) throw ValidationError("generator channels must be >= 1");
  if (slice_size < 1 || slice_size % (1 << depth) != 0) {
    throw ValidationError("slice size " + std::to_string(slice_size) + " not divisible by 2^depth = " +
                          std::to_string(1 << depth));
  }
  if (kernel != 4) throw ValidationError("generator kernel must be 4 (stride-2 halving/doubling)");
}

int GeneratorConfig::level_channels(int level) const { return base_channels << std::min(level, 3); }

void DiscriminatorConfig::validate() const {
  if (num_layers < 1) throw ValidationError("discriminator num_layers must be >= 1");
  if (base_channels < 1 || in_channels < 1) throw ValidationError("discriminator channels must be >= 1");
  if (kernel < 2) throw ValidationError("discriminator kernel must be >= 2");
}

int DiscriminatorConfig::level_channels(int level) const { return base_channels << std::min(level, 3); }

int DiscriminatorConfig::receptive_field() const {
  // Walk back from one output pixel: strides are 2 for layers 0..n-1,
  // then 1 for the last two convolutions.
  std::vector<int> strides(static_cast<std::size_t>(num_layers), 2);
  strides.push_back(1);
  strides.push_back(1);
  int r = 1;
  for (auto it = strides.rbegin(); it != strides.rend(); ++it) r = (r - 1) * *it + kernel;
  return r;
}

// ---------------------------------------------------------------- generator

Generator::Generator(GeneratorConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  params_.seed = seed;
  std::mt19937_64 rng(seed);
  const int d = config_.depth, k = config_.kernel;
  for (int i = 0; i < d; ++i) {
    const int in = i == 0 ? config_.in_channels : config_.level_channels(i - 1);
    add_conv(params_, enc(i) + ".conv", config_.level_channels(i), in, k, rng, false);
    if (i > 0 && i < d - 1) add_norm(params_, config_.norm, enc(i) + ".norm", config_.level_channels(i));
  }
  for (int i = d - 1; i >= 1; --i) {
    const int in = i == d - 1 ? config_.level_channels(i) : 2 * config_.level_channels(i);
    add_conv(params_, dec(i) + ".convt", config_.level_channels(i - 1), in, k, rng, true);
    add_norm(params_, config_.norm, dec(i) + ".norm", config_.level_channels(i - 1));
  }
  add_conv(params_, dec(0) + ".convt", config_.out_channels, 2 * config_.level_channels(0), k, rng, true);
}

std::int64_t Generator::parameter_count(const GeneratorConfig& c) {
  c.validate();
  const std::int64_t k2 = static_cast<std::int64_t>(c.kernel) * c.kernel;
  std::int64_t n = 0;
  for (int i = 0; i < c.depth; ++i) {
    const std::int64_t in = i == 0 ? c.in_channels : c.level_channels(i - 1), out = c.level_channels(i);
    n += in * out * k2 + out;
    if (i > 0 && i < c.depth - 1) n += norm_params(c.norm, out);
  }
  for (int i = c.depth - 1; i >= 1; --i) {
    const std::int64_t in = i == c.depth - 1 ? c.level_channels(i) : 2 * c.level_channels(i);
    const std::int64_t out = c.level_channels(i - 1);
    n += in * out * k2 + out + norm_params(c.norm, out);
  }
  n += 2LL * c.level_channels(0) * c.out_channels * k2 + c.out_channels;
  return n;
}

Tensor Generator::normalize(const std::string& prefix, const Tensor& t, bool training) {
  return apply_norm(params_, config_.norm, prefix, t, training);
}

Tensor Generator::forward(const Tensor& x, bool training) {
  if (x.ndim() != 4 || x.dim(1) != config_.in_channels || x.dim(2) != config_.slice_size ||
      x.dim(3) != config_.slice_size) {
    throw ShapeError("generator: expected [N," + std::to_string(config_.in_channels) + "," +
                     std::to_string(config_.slice_size) + "," + std::to_string(config_.slice_size) + "], got " +
                     shape_to_string(x.shape()));
  }
  auto& p = params_.params;
  const int d = config_.depth;
  const float slope = config_.leaky_slope;
  std::vector<Tensor> skips;
  Tensor h = x;
  for (int i = 0; i < d; ++i) {
    const std::string name = enc(i);
    h = conv2d(h, p.at(name + ".conv.weight"), p.at(name + ".conv.bias"), 2, 1);
    if (i > 0 && i < d - 1) h = normalize(name + ".norm", h, training);
    h = leaky_relu(h, slope);
    skips.push_back(h);
  }
  for (int i = d - 1; i >= 1; --i) {
    const std::string name = dec(i);
    const Tensor in = i == d - 1 ? h : concat_channels(h, skips[static_cast<std::size_t>(i)]);
    h = conv_transpose2d(in, p.at(name + ".convt.weight"), p.at(name + ".convt.bias"), 2, 1);
    h = relu(normalize(name + ".norm", h, training));
  }
  h = conv_transpose2d(concat_channels(h, skips[0]), p.at("dec0.convt.weight"), p.at("dec0.convt.bias"), 2, 1);
  return tanh(h);
}

// ------------------------------------------------------------ discriminator

Discriminator::Discriminator(DiscriminatorConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  params_.seed = seed;
  std::mt19937_64 rng(seed);
  const int n = config_.num_layers, k = config_.kernel;
  for (int i = 0; i <= n; ++i) {
    const int in = i == 0 ? config_.in_channels : config_.level_channels(i - 1);
    add_conv(params_, disc(i) + ".conv", config_.level_channels(i), in, k, rng, false);
    if (i > 0) add_norm(params_, config_.norm, disc(i) + ".norm", config_.level_channels(i));
  }
  add_conv(params_, "score.conv", 1, config_.level_channels(n), k, rng, false);
}

std::int64_t Discriminator::parameter_count(const DiscriminatorConfig& c) {
  c.validate();
  const std::int64_t k2 = static_cast<std::int64_t>(c.kernel) * c.kernel;
  std::int64_t total = 0;
  for (int i = 0; i <= c.num_layers; ++i) {
    const std::int64_t in = i == 0 ? c.in_channels : c.level_channels(i - 1), out = c.level_channels(i);
    total += in * out * k2 + out;
    if (i > 0) total += norm_params(c.norm, out);
  }
  total += static_cast<std::int64_t>(c.level_channels(c.num_layers)) * k2 + 1;
  return total;
}

std::int64_t Discriminator::output_extent(const DiscriminatorConfig& c, std::int64_t input_extent) {
  std::int64_t e = input_extent;
  for (int i = 0; i < c.num_layers; ++i) e = (e + 2 - c.kernel) / 2 + 1;
  e = e + 2 - c.kernel + 1;
  e = e + 2 - c.kernel + 1;
  return e;
}

Tensor Discriminator::normalize(const std::string& prefix, const Tensor& t, bool training) {
  return apply_norm(params_, config_.norm, prefix, t, training);
}

Tensor Discriminator::forward(const Tensor& x, const Tensor& y, bool training) {
  if (x.ndim() != 4 || y.ndim() != 4 || x.dim(0) != y.dim(0) || x.dim(2) != y.dim(2) || x.dim(3) != y.dim(3)) {
    throw ShapeError("discriminator: x " + shape_to_string(x.shape()) + " and y " + shape_to_string(y.shape()) +
                     " must agree on axes N, H, W");
  }
  if (x.dim(1) + y.dim(1) != config_.in_channels) throw ShapeError("discriminator: channel count mismatch");
  if (output_extent(config_, std::min(x.dim(2), x.dim(3))) < 1) throw ShapeError("discriminator: input too small");
  auto& p = params_.params;
  const int n = config_.num_layers;
  Tensor h = concat_channels(x, y);
  for (int i = 0; i <= n; ++i) {
    const std::string name = disc(i);
    h = conv2d(h, p.at(name + ".conv.weight"), p.at(name + ".conv.bias"), i < n ? 2 : 1, 1);
    if (i > 0) h = normalize(name + ".norm", h, training);
    h = leaky_relu(h, config_.leaky_slope);
  }
  return conv2d(h, p.at("score.conv.weight"), p.at("score.conv.bias"), 1, 1);
}

// ---------------------------------------------------------------- baselines

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::unet_ssim: return "unet_ssim";
    case ModelKind::pix2pix: return "pix2pix";
    case ModelKind::ours: return "ours";
    case ModelKind::ours_drs: return "ours_drs";
  }
  return "ours";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "unet_ssim") return ModelKind::unet_ssim;
  if (name == "pix2pix") return ModelKind::pix2pix;
  if (name == "ours") return ModelKind::ours;
  if (name == "ours_drs") return ModelKind::ours_drs;
  throw InvalidArgument("unknown model kind '" + name + "' (expected unet_ssim, pix2pix, ours or ours_drs)");
}

ModelSpec build_baseline(ModelKind kind, const GeneratorConfig& generator, const DiscriminatorConfig& discriminator) {
  ModelSpec spec;
  spec.kind = kind;
  spec.generator = generator;
  DiscriminatorConfig d = discriminator;
  switch (kind) {
    case ModelKind::unet_ssim:
      spec.generator.norm = NormKind::instance;
      spec.adversarial = AdversarialKind::none;
      spec.loss.recon = losses::ReconKind::ssim_l1;
      spec.loss.lambda_recon = 1.0f;
      break;
    case ModelKind::pix2pix:
      spec.generator.norm = NormKind::batch;
      d.norm = NormKind::batch;
      spec.discriminator = d;
      spec.adversarial = AdversarialKind::bce;
      spec.loss.recon = losses::ReconKind::l1;
      spec.loss.lambda_recon = 100.0f;
      break;
    case ModelKind::ours:
    case ModelKind::ours_drs:
      spec.generator.norm = NormKind::instance;
      d.norm = NormKind::instance;
      spec.discriminator = d;
      spec.adversarial = AdversarialKind::lsgan;
      spec.loss.recon = losses::ReconKind::charbonnier;
      spec.loss.lambda_recon = 200.0f;
      spec.loss.eps_charbonnier = 1e-6;
      spec.drs = kind == ModelKind::ours_drs;
      break;
  }
  spec.generator.validate();
  if (spec.discriminator) spec.discriminator->validate();
  return spec;
}

}  // namespace jexpand::nets
