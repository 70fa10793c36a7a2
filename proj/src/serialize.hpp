#pragma once

// JSON (de)serialization of the configuration structs, shared by the
// experiment config and the checkpoint reader. Readers reject unknown keys.

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "jexpand/networks.hpp"
#include "jexpand/trainer.hpp"

namespace jexpand::serial {

using nlohmann::json;

/// Throws ValidationError naming `where` and the offending key.
void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where);

json to_json(const nets::GeneratorConfig& c);
json to_json(const nets::DiscriminatorConfig& c);
json to_json(const losses::LossWeights& w);
json to_json(const nets::ModelSpec& spec);
json to_json(const train::TrainConfig& c);

nets::GeneratorConfig generator_from_json(const json& j);
nets::DiscriminatorConfig discriminator_from_json(const json& j);
losses::LossWeights loss_from_json(const json& j);
nets::ModelSpec model_spec_from_json(const json& j);
train::TrainConfig train_config_from_json(const json& j);

std::string to_string(losses::ReconKind kind);
losses::ReconKind recon_kind_from_string(const std::string& name);
std::string to_string(nets::AdversarialKind kind);
nets::AdversarialKind adversarial_kind_from_string(const std::string& name);

}  // namespace jexpand::serial
