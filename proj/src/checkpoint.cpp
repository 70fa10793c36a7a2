#include "jexpand/checkpoint.hpp"

#include <fstream>

#include "jexpand/error.hpp"
#include "jexpand/tensor_io.hpp"
#include "serialize.hpp"

namespace jexpand::ckpt {

namespace fs = std::filesystem;
using serial::json;

namespace {

constexpr const char* kFormat = "jexpand.checkpoint";

Tensor vector_tensor(const std::vector<float>& v) {
  return Tensor::from_data({static_cast<std::int64_t>(v.size())}, v);
}

struct NetView {
  const char* prefix;
  nets::NetworkParams* params;
  AdamState* adam;
};

void save_net(const fs::path& tensor_dir, const std::string& p, const nets::NetworkParams& params,
              const AdamState& adam, json& tensors, json& meta) {
  for (const auto& [name, t] : params.params) {
    const std::string file = p + ".param." + name + ".jxt";
    io::save_tensor(tensor_dir / file, t);
    tensors.push_back(file);
  }
  for (const auto& [name, m] : adam.first_moment) {
    const std::string file = p + ".adam_m." + name + ".jxt";
    io::save_tensor(tensor_dir / file, vector_tensor(m));
    tensors.push_back(file);
  }
  for (const auto& [name, v] : adam.second_moment) {
    const std::string file = p + ".adam_v." + name + ".jxt";
    io::save_tensor(tensor_dir / file, vector_tensor(v));
    tensors.push_back(file);
  }
  json bn = json::object();
  for (const auto& [name, stats] : params.buffers) {
    bn[name] = {{"initialized", stats.initialized}, {"momentum", stats.momentum}};
    if (stats.initialized) {
      io::save_tensor(tensor_dir / (p + ".bn_mean." + name + ".jxt"), vector_tensor(stats.mean));
      io::save_tensor(tensor_dir / (p + ".bn_var." + name + ".jxt"), vector_tensor(stats.var));
      tensors.push_back(p + ".bn_mean." + name + ".jxt");
      tensors.push_back(p + ".bn_var." + name + ".jxt");
    }
  }
  meta = {{"adam_step_count", adam.step_count},
          {"adam_skipped_steps", adam.skipped_steps},
          {"batch_norm", bn},
          {"init_seed", params.seed}};
}

std::vector<float> load_vector(const fs::path& path, std::size_t expected) {
  const Tensor t = io::load_tensor(path);
  if (t.ndim() != 1 || static_cast<std::size_t>(t.numel()) != expected) {
    throw ValidationError("checkpoint: " + path.filename().string() + " has the wrong length");
  }
  return {t.data().begin(), t.data().end()};
}

void load_net(const fs::path& tensor_dir, const NetView& net, const json& meta) {
  const std::string p = net.prefix;
  for (auto& [name, t] : net.params->params) {
    const Tensor saved = io::load_tensor(tensor_dir / (p + ".param." + name + ".jxt"));
    if (saved.shape() != t.shape()) {
      throw ValidationError("checkpoint: parameter " + name + " has shape " + shape_to_string(saved.shape()) +
                            ", model expects " + shape_to_string(t.shape()));
    }
    std::copy(saved.data().begin(), saved.data().end(), t.mutable_data().begin());
  }
  if (net.adam) {
    net.adam->step_count = meta.at("adam_step_count").get<std::int64_t>();
    net.adam->skipped_steps = meta.at("adam_skipped_steps").get<std::int64_t>();
    net.adam->first_moment.clear();
    net.adam->second_moment.clear();
    for (const auto& [name, t] : net.params->params) {
      const fs::path m = tensor_dir / (p + ".adam_m." + name + ".jxt");
      if (!fs::exists(m)) continue;
      const auto n = static_cast<std::size_t>(t.numel());
      net.adam->first_moment[name] = load_vector(m, n);
      net.adam->second_moment[name] = load_vector(tensor_dir / (p + ".adam_v." + name + ".jxt"), n);
    }
  }
  const auto& bn = meta.at("batch_norm");
  for (auto& [name, stats] : net.params->buffers) {
    if (!bn.contains(name)) throw ValidationError("checkpoint: missing batch-norm statistics for " + name);
    stats.initialized = bn.at(name).at("initialized").get<bool>();
    stats.momentum = bn.at(name).at("momentum").get<float>();
    if (stats.initialized) {
      const auto c = static_cast<std::size_t>(net.params->params.at(name + ".gamma").numel());
      stats.mean = load_vector(tensor_dir / (p + ".bn_mean." + name + ".jxt"), c);
      stats.var = load_vector(tensor_dir / (p + ".bn_var." + name + ".jxt"), c);
    }
  }
}

json read_json(const fs::path& dir) {
  const fs::path path = dir / "checkpoint.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  try {
    json j = json::parse(in);
    serial::reject_unknown(j,
                           {"format", "version", "model", "train", "epoch", "global_step", "config_hash", "generator",
                            "discriminator", "history", "tensors"},
                           "checkpoint");
    if (j.at("format") != kFormat) throw ValidationError("checkpoint: wrong format tag");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ValidationError("checkpoint: unsupported version " + j.at("version").dump());
    }
    return j;
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace

void save_checkpoint(const fs::path& dir, const train::TrainState& state, const std::string& config_hash) {
  const fs::path tmp = dir.string() + ".tmp";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp / "tensors");

  json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  j["model"] = serial::to_json(state.spec);
  j["train"] = serial::to_json(state.config);
  j["epoch"] = state.epoch;
  j["global_step"] = state.global_step;
  j["config_hash"] = config_hash;
  json tensors = json::array();
  json gmeta, dmeta = nullptr;
  save_net(tmp / "tensors", "G", state.generator.params(), state.adam_g, tensors, gmeta);
  if (state.discriminator) save_net(tmp / "tensors", "D", state.discriminator->params(), state.adam_d, tensors, dmeta);
  j["generator"] = gmeta;
  j["discriminator"] = dmeta;
  j["history"] = json::array();
  for (const auto& e : state.history) {
    j["history"].push_back(
        {{"epoch", e.epoch}, {"k", e.k}, {"d_loss", e.d_loss}, {"g_adv", e.g_adv}, {"g_ch", e.g_ch}});
  }
  j["tensors"] = tensors;
  {
    std::ofstream out(tmp / "checkpoint.json", std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint in " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("short write to checkpoint in " + tmp.string());
  }
  fs::remove_all(dir, ec);
  fs::rename(tmp, dir);
}

CheckpointInfo read_checkpoint_info(const fs::path& dir) {
  const json j = read_json(dir);
  try {
    CheckpointInfo info;
    info.spec = serial::model_spec_from_json(j.at("model"));
    info.config = serial::train_config_from_json(j.at("train"));
    info.epoch = j.at("epoch").get<int>();
    info.global_step = j.at("global_step").get<std::int64_t>();
    info.config_hash = j.at("config_hash").get<std::string>();
    return info;
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint " + dir.string() + ": " + e.what());
  }
}

train::TrainState load_checkpoint(const fs::path& dir) {
  const json j = read_json(dir);
  const CheckpointInfo info = read_checkpoint_info(dir);
  train::TrainState state(info.spec, info.config);
  try {
    state.epoch = info.epoch;
    state.global_step = info.global_step;
    load_net(dir / "tensors", {"G", &state.generator.params(), &state.adam_g}, j.at("generator"));
    if (state.discriminator) {
      if (j.at("discriminator").is_null()) throw ValidationError("checkpoint: discriminator state missing");
      load_net(dir / "tensors", {"D", &state.discriminator->params(), &state.adam_d}, j.at("discriminator"));
    }
    for (const auto& h : j.at("history")) {
      train::EpochLog e;
      e.epoch = h.at("epoch").get<int>();
      e.k = h.at("k").get<int>();
      e.d_loss = h.at("d_loss").get<double>();
      e.g_adv = h.at("g_adv").get<double>();
      e.g_ch = h.at("g_ch").get<double>();
      state.history.push_back(e);
    }
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint " + dir.string() + ": " + e.what());
  }
  return state;
}

nets::Generator load_generator(const fs::path& dir) {
  const json j = read_json(dir);
  const CheckpointInfo info = read_checkpoint_info(dir);
  nets::Generator g(info.spec.generator, 0);
  try {
    load_net(dir / "tensors", {"G", &g.params(), nullptr}, j.at("generator"));
    g.params().seed = j.at("generator").at("init_seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint " + dir.string() + ": " + e.what());
  }
  return g;
}

}  // namespace jexpand::ckpt
