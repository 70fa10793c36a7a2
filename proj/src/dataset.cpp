#include "jexpand/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "jexpand/error.hpp"
#include "jexpand/random.hpp"
#include "jexpand/tensor_io.hpp"

namespace jexpand {

using nlohmann::json;

namespace {

std::string stage_name(DataStage s) { return s == DataStage::raw ? "raw" : "processed"; }

DataStage stage_from(const std::string& s) {
  if (s == "raw") return DataStage::raw;
  if (s == "processed") return DataStage::processed;
  throw ValidationError("manifest: unknown stage '" + s + "'");
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ValidationError(where + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace

std::vector<const ManifestEntry*> DatasetManifest::entries_in(Split split) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(&e);
  return out;
}

void DatasetManifest::validate(bool check_files) const {
  if (version != kVersion) throw ValidationError("manifest: unsupported version " + std::to_string(version));
  if (slice_h < 1 || slice_w < 1) throw ValidationError("manifest: slice size must be positive");
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (e.id.empty()) throw ValidationError("manifest: empty entry id");
    if (!ids.insert(e.id).second) throw ValidationError("manifest: duplicate id '" + e.id + "'");
    if (check_files) {
      for (const auto& p : {e.x_path, e.y_path}) {
        if (!std::filesystem::exists(resolve(p))) throw IoError("manifest: missing file " + resolve(p).string());
      }
    }
  }
  if (stage == DataStage::processed) {
    if (!clip_stats) throw ValidationError("manifest: processed data without clip statistics");
    if (clip_stats->source != Split::train) throw ValidationError("manifest: clip statistics not from the train split");
  }
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  try {
    reject_unknown(j, {"format", "version", "stage", "slice_size", "clip_stats", "config_hash", "entries"}, "manifest");
    if (j.value("format", std::string()) != "jexpand.manifest") throw ValidationError("manifest: wrong format tag");
    m.version = j.at("version").get<int>();
    m.stage = stage_from(j.at("stage").get<std::string>());
    const auto& size = j.at("slice_size");
    m.slice_h = size.at(0).get<std::int64_t>();
    m.slice_w = size.at(1).get<std::int64_t>();
    m.config_hash = j.value("config_hash", std::string());
    if (j.contains("clip_stats") && !j.at("clip_stats").is_null()) {
      const auto& cs = j.at("clip_stats");
      reject_unknown(cs, {"mu", "sigma", "n_train", "source_split"}, "manifest.clip_stats");
      ClipStats s;
      s.mu = cs.at("mu").get<double>();
      s.sigma = cs.at("sigma").get<double>();
      s.n_train = cs.at("n_train").get<std::int64_t>();
      s.source = split_from_string(cs.at("source_split").get<std::string>());
      m.clip_stats = s;
    }
    for (const auto& e : j.at("entries")) {
      reject_unknown(e, {"id", "x_path", "y_path", "severity_tag", "split"}, "manifest entry");
      ManifestEntry entry;
      entry.id = e.at("id").get<std::string>();
      entry.x_path = e.at("x_path").get<std::string>();
      entry.y_path = e.at("y_path").get<std::string>();
      entry.severity_tag = e.value("severity_tag", std::string());
      entry.split = split_from_string(e.at("split").get<std::string>());
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw ValidationError("manifest " + path.string() + ": " + e.what());
  }
  m.base_dir = path.parent_path();
  m.validate(true);
  return m;
}

void DatasetManifest::save(const std::filesystem::path& path) const {
  validate(false);
  json j;
  j["format"] = "jexpand.manifest";
  j["version"] = version;
  j["stage"] = stage_name(stage);
  j["slice_size"] = {slice_h, slice_w};
  j["config_hash"] = config_hash;
  if (clip_stats) {
    j["clip_stats"] = {{"mu", clip_stats->mu},
                       {"sigma", clip_stats->sigma},
                       {"n_train", clip_stats->n_train},
                       {"source_split", to_string(clip_stats->source)}};
  } else {
    j["clip_stats"] = nullptr;
  }
  j["entries"] = json::array();
  for (const auto& e : entries) {
    j["entries"].push_back({{"id", e.id},
                            {"x_path", e.x_path},
                            {"y_path", e.y_path},
                            {"severity_tag", e.severity_tag},
                            {"split", to_string(e.split)}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write to manifest " + path.string());
}

std::vector<SamplePair> load_split(const DatasetManifest& manifest, Split split) {
  std::vector<SamplePair> out;
  for (const auto* e : manifest.entries_in(split)) {
    SamplePair s{io::load_tensor(manifest.resolve(e->x_path)), io::load_tensor(manifest.resolve(e->y_path)),
                 e->severity_tag, e->id};
    if (s.x.shape() != s.y.shape() || s.x.ndim() != 2) {
      throw ValidationError("sample '" + e->id + "': x and y must be matching [H,W] slices");
    }
    if (manifest.stage == DataStage::processed) {
      if (s.x.dim(0) != manifest.slice_h || s.x.dim(1) != manifest.slice_w) {
        throw ValidationError("sample '" + e->id + "': slice size differs from the manifest");
      }
      for (const auto& t : {s.x, s.y}) {
        for (float v : t.data()) {
          if (v < -1.0f || v > 1.0f) throw ValidationError("sample '" + e->id + "': value outside [-1,1]");
        }
      }
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw ValidationError("split '" + to_string(split) + "' is empty");
  return out;
}

Batch make_batch(const std::vector<SamplePair>& samples, const std::vector<std::int64_t>& indices) {
  if (indices.empty()) throw InvalidArgument("make_batch: no indices");
  const auto& first = samples.at(static_cast<std::size_t>(indices.front()));
  const std::int64_t h = first.x.dim(0), w = first.x.dim(1), hw = h * w;
  const auto b = static_cast<std::int64_t>(indices.size());
  std::vector<float> xs(static_cast<std::size_t>(b * hw)), ys(xs.size());
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& s = samples.at(static_cast<std::size_t>(indices[i]));
    if (s.x.dim(0) != h || s.x.dim(1) != w) throw ShapeError("make_batch: slices of different sizes");
    std::copy(s.x.data().begin(), s.x.data().end(), xs.begin() + i * hw);
    std::copy(s.y.data().begin(), s.y.data().end(), ys.begin() + i * hw);
  }
  return {Tensor::from_data({b, 1, h, w}, std::move(xs)), Tensor::from_data({b, 1, h, w}, std::move(ys)), indices};
}

BatchIterator::BatchIterator(std::int64_t num_samples, std::int64_t batch_size, std::uint64_t seed)
    : num_samples_(num_samples), batch_size_(batch_size), seed_(seed) {
  if (num_samples < 1) throw ValidationError("batch iterator: split is empty");
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw ValidationError("batch size must be even and >= 2, got " + std::to_string(batch_size));
  }
}

std::vector<std::vector<std::int64_t>> BatchIterator::epoch(std::int64_t epoch) const {
  std::vector<std::int64_t> order(static_cast<std::size_t>(num_samples_));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed_, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::int64_t>> batches;
  for (std::int64_t b = 0; b < batches_per_epoch(); ++b) {
    batches.emplace_back(order.begin() + b * batch_size_, order.begin() + (b + 1) * batch_size_);
  }
  return batches;
}

BatchStream::BatchStream(std::vector<SamplePair> samples, std::int64_t batch_size, std::uint64_t seed)
    : samples_(std::move(samples)), iterator_(static_cast<std::int64_t>(samples_.size()), batch_size, seed) {}

BatchStream::BatchStream(const DatasetManifest& manifest, Split split, std::int64_t batch_size, std::uint64_t seed)
    : BatchStream(load_split(manifest, split), batch_size, seed) {}

std::vector<Batch> BatchStream::epoch(std::int64_t epoch) const {
  std::vector<Batch> out;
  for (const auto& idx : iterator_.epoch(epoch)) out.push_back(make_batch(samples_, idx));
  return out;
}

}  // namespace jexpand
