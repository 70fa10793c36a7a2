#include "serialize.hpp"

#include <algorithm>

#include "jexpand/error.hpp"

namespace jexpand::serial {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ValidationError(where + ": unknown key '" + key + "'");
    }
  }
}

std::string to_string(losses::ReconKind kind) {
  switch (kind) {
    case losses::ReconKind::charbonnier: return "charbonnier";
    case losses::ReconKind::l1: return "l1";
    case losses::ReconKind::ssim_l1: return "ssim_l1";
  }
  return "charbonnier";
}

losses::ReconKind recon_kind_from_string(const std::string& name) {
  if (name == "charbonnier") return losses::ReconKind::charbonnier;
  if (name == "l1") return losses::ReconKind::l1;
  if (name == "ssim_l1") return losses::ReconKind::ssim_l1;
  throw ValidationError("unknown reconstruction loss '" + name + "'");
}

std::string to_string(nets::AdversarialKind kind) {
  switch (kind) {
    case nets::AdversarialKind::none: return "none";
    case nets::AdversarialKind::lsgan: return "lsgan";
    case nets::AdversarialKind::bce: return "bce";
  }
  return "none";
}

nets::AdversarialKind adversarial_kind_from_string(const std::string& name) {
  if (name == "none") return nets::AdversarialKind::none;
  if (name == "lsgan") return nets::AdversarialKind::lsgan;
  if (name == "bce") return nets::AdversarialKind::bce;
  throw ValidationError("unknown adversarial loss '" + name + "'");
}

json to_json(const nets::GeneratorConfig& c) {
  return {{"depth", c.depth},
          {"base_channels", c.base_channels},
          {"norm", nets::to_string(c.norm)},
          {"in_channels", c.in_channels},
          {"out_channels", c.out_channels},
          {"slice_size", c.slice_size}};
}

json to_json(const nets::DiscriminatorConfig& c) {
  return {{"num_layers", c.num_layers},
          {"base_channels", c.base_channels},
          {"norm", nets::to_string(c.norm)},
          {"in_channels", c.in_channels}};
}

json to_json(const losses::LossWeights& w) {
  return {{"lambda", w.lambda_recon}, {"eps", w.eps_charbonnier}, {"recon", to_string(w.recon)}};
}

json to_json(const nets::ModelSpec& spec) {
  json j;
  j["kind"] = nets::to_string(spec.kind);
  j["generator"] = to_json(spec.generator);
  j["discriminator"] = spec.discriminator ? to_json(*spec.discriminator) : json(nullptr);
  j["loss"] = to_json(spec.loss);
  j["adversarial"] = to_string(spec.adversarial);
  j["drs"] = spec.drs;
  return j;
}

json to_json(const train::TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr_g", c.lr_g},
          {"lr_d", c.lr_d},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"drs_enabled", c.drs_enabled},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"model_kind", nets::to_string(c.model_kind)}};
}

nets::GeneratorConfig generator_from_json(const json& j) {
  reject_unknown(j, {"depth", "base_channels", "norm", "in_channels", "out_channels", "slice_size"}, "generator");
  nets::GeneratorConfig c;
  c.depth = j.value("depth", c.depth);
  c.base_channels = j.value("base_channels", c.base_channels);
  if (j.contains("norm")) c.norm = nets::norm_kind_from_string(j.at("norm").get<std::string>());
  c.in_channels = j.value("in_channels", c.in_channels);
  c.out_channels = j.value("out_channels", c.out_channels);
  c.slice_size = j.value("slice_size", c.slice_size);
  return c;
}

nets::DiscriminatorConfig discriminator_from_json(const json& j) {
  reject_unknown(j, {"num_layers", "base_channels", "norm", "in_channels"}, "discriminator");
  nets::DiscriminatorConfig c;
  c.num_layers = j.value("num_layers", c.num_layers);
  c.base_channels = j.value("base_channels", c.base_channels);
  if (j.contains("norm")) c.norm = nets::norm_kind_from_string(j.at("norm").get<std::string>());
  c.in_channels = j.value("in_channels", c.in_channels);
  return c;
}

losses::LossWeights loss_from_json(const json& j) {
  reject_unknown(j, {"lambda", "eps", "recon"}, "loss");
  losses::LossWeights w;
  w.lambda_recon = j.value("lambda", w.lambda_recon);
  w.eps_charbonnier = j.value("eps", w.eps_charbonnier);
  if (j.contains("recon")) w.recon = recon_kind_from_string(j.at("recon").get<std::string>());
  return w;
}

nets::ModelSpec model_spec_from_json(const json& j) {
  reject_unknown(j, {"kind", "generator", "discriminator", "loss", "adversarial", "drs"}, "model");
  nets::ModelSpec spec;
  spec.kind = nets::model_kind_from_string(j.at("kind").get<std::string>());
  spec.generator = generator_from_json(j.at("generator"));
  if (!j.at("discriminator").is_null()) spec.discriminator = discriminator_from_json(j.at("discriminator"));
  spec.loss = loss_from_json(j.at("loss"));
  spec.adversarial = adversarial_kind_from_string(j.at("adversarial").get<std::string>());
  spec.drs = j.at("drs").get<bool>();
  return spec;
}

train::TrainConfig train_config_from_json(const json& j) {
  reject_unknown(j,
                 {"epochs", "batch_size", "lr_g", "lr_d", "beta1", "beta2", "drs_enabled", "seed", "checkpoint_every",
                  "model_kind"},
                 "train");
  train::TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_g = j.value("lr_g", c.lr_g);
  c.lr_d = j.value("lr_d", c.lr_d);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.drs_enabled = j.value("drs_enabled", c.drs_enabled);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  if (j.contains("model_kind")) c.model_kind = nets::model_kind_from_string(j.at("model_kind").get<std::string>());
  return c;
}

}  // namespace jexpand::serial
