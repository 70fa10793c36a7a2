#include "jexpand/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "jexpand/error.hpp"
#include "serialize.hpp"

namespace jexpand {

using serial::json;

namespace {

struct Location {
  std::size_t line = 1;
  std::size_t column = 1;
};

Location locate(const std::string& text, std::size_t offset) {
  Location loc;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++loc.line;
      loc.column = 1;
    } else {
      ++loc.column;
    }
  }
  return loc;
}

// Best-effort source line of a key for semantic errors.
std::string key_line(const std::string& text, const std::string& message) {
  const auto open = message.find('\'');
  const auto close = open == std::string::npos ? open : message.find('\'', open + 1);
  if (close == std::string::npos) return "";
  const auto pos = text.find('"' + message.substr(open + 1, close - open - 1) + '"');
  if (pos == std::string::npos) return "";
  return " (line " + std::to_string(locate(text, pos).line) + ")";
}

std::optional<nets::NormKind> optional_norm(const json& j) {
  if (j.is_null()) return std::nullopt;
  return nets::norm_kind_from_string(j.get<std::string>());
}

json norm_json(const std::optional<nets::NormKind>& n) { return n ? json(nets::to_string(*n)) : json(nullptr); }

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
void read_optional(const json& obj, const char* key, std::optional<T>& out) {
  if (!obj.contains(key)) return;
  if (obj.at(key).is_null()) {
    out.reset();
  } else {
    out = obj.at(key).get<T>();
  }
}

void apply_overrides(ExperimentConfig& c, const json& j) {
  serial::reject_unknown(
      j, {"preset", "model", "seed", "train", "generator", "discriminator", "loss", "phantom", "paths"}, "config");
  if (j.contains("model")) c.model = nets::model_kind_from_string(j.at("model").get<std::string>());
  c.seed = j.value("seed", c.seed);
  if (j.contains("train")) {
    const auto& t = j.at("train");
    serial::reject_unknown(t, {"epochs", "batch_size", "lr_g", "lr_d", "beta1", "beta2", "drs_enabled", "checkpoint_every"},
                           "config.train");
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.lr_g = t.value("lr_g", c.train.lr_g);
    c.train.lr_d = t.value("lr_d", c.train.lr_d);
    c.train.beta1 = t.value("beta1", c.train.beta1);
    c.train.beta2 = t.value("beta2", c.train.beta2);
    c.train.checkpoint_every = t.value("checkpoint_every", c.train.checkpoint_every);
    read_optional(t, "drs_enabled", c.drs_enabled);
  }
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    serial::reject_unknown(g, {"depth", "base_channels", "norm", "slice_size"}, "config.generator");
    c.generator.depth = g.value("depth", c.generator.depth);
    c.generator.base_channels = g.value("base_channels", c.generator.base_channels);
    c.generator.slice_size = g.value("slice_size", c.generator.slice_size);
    if (g.contains("norm")) c.generator_norm = optional_norm(g.at("norm"));
  }
  if (j.contains("discriminator")) {
    const auto& d = j.at("discriminator");
    serial::reject_unknown(d, {"num_layers", "base_channels", "norm"}, "config.discriminator");
    c.discriminator.num_layers = d.value("num_layers", c.discriminator.num_layers);
    c.discriminator.base_channels = d.value("base_channels", c.discriminator.base_channels);
    if (d.contains("norm")) c.discriminator_norm = optional_norm(d.at("norm"));
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    serial::reject_unknown(l, {"lambda", "eps"}, "config.loss");
    read_optional(l, "lambda", c.lambda);
    read_optional(l, "eps", c.eps);
  }
  if (j.contains("phantom")) {
    const auto& p = j.at("phantom");
    serial::reject_unknown(
        p, {"count", "train_count", "severity_mix", "size", "num_blobs", "smoothness_scale", "noise_sd"}, "config.phantom");
    c.phantom.count = p.value("count", c.phantom.count);
    read_optional(p, "train_count", c.phantom.train_count);
    c.phantom.severity_mix = p.value("severity_mix", c.phantom.severity_mix);
    if (p.contains("size")) {
      c.phantom.spec.height = p.at("size").at(0).get<std::int64_t>();
      c.phantom.spec.width = p.at("size").at(1).get<std::int64_t>();
    }
    c.phantom.spec.num_blobs = p.value("num_blobs", c.phantom.spec.num_blobs);
    c.phantom.spec.smoothness_scale = p.value("smoothness_scale", c.phantom.spec.smoothness_scale);
    c.phantom.spec.noise_sd = p.value("noise_sd", c.phantom.spec.noise_sd);
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    serial::reject_unknown(p, {"manifest", "out_dir"}, "config.paths");
    c.manifest = p.value("manifest", c.manifest);
    c.out_dir = p.value("out_dir", c.out_dir);
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["model"] = nets::to_string(c.model);
  j["seed"] = c.seed;
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"lr_g", c.train.lr_g},
                {"lr_d", c.train.lr_d},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"checkpoint_every", c.train.checkpoint_every},
                {"drs_enabled", optional_json(c.drs_enabled)}};
  j["generator"] = {{"depth", c.generator.depth},
                    {"base_channels", c.generator.base_channels},
                    {"slice_size", c.generator.slice_size},
                    {"norm", norm_json(c.generator_norm)}};
  j["discriminator"] = {{"num_layers", c.discriminator.num_layers},
                        {"base_channels", c.discriminator.base_channels},
                        {"norm", norm_json(c.discriminator_norm)}};
  j["loss"] = {{"lambda", optional_json(c.lambda)}, {"eps", optional_json(c.eps)}};
  j["phantom"] = {{"count", c.phantom.count},
                  {"train_count", optional_json(c.phantom.train_count)},
                  {"severity_mix", c.phantom.severity_mix},
                  {"size", {c.phantom.spec.height, c.phantom.spec.width}},
                  {"num_blobs", c.phantom.spec.num_blobs},
                  {"smoothness_scale", c.phantom.spec.smoothness_scale},
                  {"noise_sd", c.phantom.spec.noise_sd}};
  j["paths"] = {{"manifest", c.manifest}, {"out_dir", c.out_dir}};
  return j;
}

}  // namespace

nets::ModelSpec ExperimentConfig::model_spec() const {
  nets::ModelSpec spec = nets::build_baseline(model, generator, discriminator);
  if (generator_norm) spec.generator.norm = *generator_norm;
  if (discriminator_norm && spec.discriminator) spec.discriminator->norm = *discriminator_norm;
  if (lambda) spec.loss.lambda_recon = static_cast<float>(*lambda);
  if (eps) spec.loss.eps_charbonnier = *eps;
  if (drs_enabled) spec.drs = *drs_enabled;
  spec.generator.validate();
  return spec;
}

train::TrainConfig ExperimentConfig::resolved_train() const {
  train::TrainConfig t = train;
  t.model_kind = model;
  t.seed = seed;
  t.drs_enabled = model_spec().drs;
  return t;
}

void ExperimentConfig::validate() const {
  try {
    const auto spec = model_spec();
    resolved_train().validate();
    if (spec.drs && !spec.discriminator) throw ConfigError("top-k selection needs a discriminator");
    if (lambda && !(*lambda >= 0.0)) throw ConfigError("loss.lambda must be >= 0");
    if (eps && !(*eps > 0.0)) throw ConfigError("loss.eps must be > 0");
    if (phantom.count < 0) throw ConfigError("phantom.count must be >= 0");
    if (phantom.train_count && (*phantom.train_count < 0 || *phantom.train_count > phantom.count)) {
      throw ConfigError("phantom.train_count must lie in [0, count]");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  c.lambda = 200.0;
  c.eps = 1e-6;
  c.train.lr_g = 2e-4;
  c.train.lr_d = 1e-4;
  if (name == "desk") {
    c.train.epochs = 200;
    c.train.batch_size = 16;
    c.generator.depth = 4;
    c.generator.base_channels = 32;
    c.generator.slice_size = 64;
    c.discriminator.num_layers = 3;
    c.discriminator.base_channels = 16;
    c.phantom.spec.height = c.phantom.spec.width = 64;
  } else if (name == "paper") {
    c.train.epochs = 200;
    c.train.batch_size = 64;
    c.generator.depth = 8;
    c.generator.base_channels = 64;
    c.generator.slice_size = 256;
    c.discriminator.num_layers = 3;
    c.discriminator.base_channels = 64;
    c.phantom.spec.height = c.phantom.spec.width = 256;
  } else {
    throw InvalidArgument("unknown preset '" + name + "' (expected desk or paper)");
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const Location loc = locate(text, e.byte == 0 ? 0 : e.byte - 1);
    std::string what = e.what();
    const auto colon = what.find("syntax error");
    if (colon != std::string::npos) what = what.substr(colon);
    throw ConfigError(source + ":" + std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": " + what);
  }
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig c = preset_config(j.value("preset", std::string("desk")));
    apply_overrides(c, j);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(source + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(source + key_line(text, e.what()) + ": " + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string to_json_string(const ExperimentConfig& config, int indent) { return to_json(config).dump(indent); }

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("paths");
  return fnv1a_hex(j.dump());
}

}  // namespace jexpand
