#include "jexpand/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "jexpand/error.hpp"
#include "jexpand/random.hpp"
#include "jexpand/tensor_io.hpp"

namespace jexpand {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTagStream = 0x7a6;
constexpr std::uint64_t kSplitStream = 0x5b1;
constexpr std::uint64_t kJitterStream = 0x317;
constexpr std::uint64_t kPairStream = 0x1000;

std::string pair_id(std::int64_t i, std::int64_t count) {
  const int width = std::max<int>(4, static_cast<int>(std::to_string(std::max<std::int64_t>(count - 1, 0)).size()));
  std::string digits = std::to_string(i);
  return "p" + std::string(static_cast<std::size_t>(std::max<int>(0, width - static_cast<int>(digits.size()))), '0') +
         digits;
}

Tensor jmap_tensor(const phantom::JacobianMap& m) {
  std::vector<float> v(m.values.size());
  std::transform(m.values.begin(), m.values.end(), v.begin(), [](double x) { return static_cast<float>(x); });
  return Tensor::from_data({m.height, m.width}, std::move(v));
}

double parse_number(const std::string& s, const std::string& entry) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("severity mix: bad number in '" + entry + "'");
  }
}

}  // namespace

std::vector<SeverityLevel> parse_severity_mix(const std::string& spec) {
  std::vector<SeverityLevel> out;
  std::set<std::string> seen;
  std::stringstream ss(spec);
  std::string entry;
  while (std::getline(ss, entry, ',')) {
    std::vector<std::string> parts;
    std::stringstream es(entry);
    std::string part;
    while (std::getline(es, part, ':')) parts.push_back(part);
    if (parts.size() < 2 || parts.size() > 3 || parts[0].empty()) {
      throw InvalidArgument("severity mix: expected tag:severity[:weight], got '" + entry + "'");
    }
    SeverityLevel level{parts[0], parse_number(parts[1], entry), 1.0};
    if (parts.size() == 3) level.weight = parse_number(parts[2], entry);
    if (!(level.severity >= 0.0 && level.severity <= 1.0)) {
      throw InvalidArgument("severity mix: severity of '" + level.tag + "' outside [0, 1]");
    }
    if (!(level.weight > 0.0)) throw InvalidArgument("severity mix: weight of '" + level.tag + "' must be > 0");
    if (!seen.insert(level.tag).second) throw InvalidArgument("severity mix: duplicate tag '" + level.tag + "'");
    out.push_back(level);
  }
  if (out.empty()) throw InvalidArgument("severity mix is empty");
  return out;
}

std::vector<std::int64_t> apportion(std::int64_t total, const std::vector<double>& weights) {
  if (weights.empty()) throw InvalidArgument("apportion: no weights");
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::int64_t> counts(weights.size());
  std::vector<double> remainder(weights.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    counts[i] = static_cast<std::int64_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size(), ++assigned) ++counts[order[i]];
  return counts;
}

std::vector<Split> stratified_split(const std::vector<std::string>& tags, std::int64_t train_count, std::uint64_t seed) {
  const auto n = static_cast<std::int64_t>(tags.size());
  if (train_count < 0 || train_count > n) throw InvalidArgument("stratified_split: train count out of range");
  std::vector<std::string> groups;
  for (const auto& t : tags)
    if (std::find(groups.begin(), groups.end(), t) == groups.end()) groups.push_back(t);
  std::vector<double> sizes;
  std::vector<std::vector<std::int64_t>> members(groups.size());
  for (std::int64_t i = 0; i < n; ++i) {
    const auto g = static_cast<std::size_t>(std::find(groups.begin(), groups.end(), tags[i]) - groups.begin());
    members[g].push_back(i);
  }
  for (const auto& m : members) sizes.push_back(static_cast<double>(m.size()));
  std::vector<Split> out(static_cast<std::size_t>(n), Split::test);
  if (n == 0) return out;
  const auto quota = apportion(train_count, sizes);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto idx = members[g];
    std::mt19937_64 rng(derive_seed(seed, kSplitStream + g));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::int64_t j = 0; j < quota[g]; ++j) out[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])] = Split::train;
  }
  return out;
}

DatasetManifest generate_phantom_dataset(const PhantomGenOptions& options) {
  if (options.count < 0) throw InvalidArgument("phantom-gen: count must be >= 0");
  if (!(options.severity_jitter >= 0.0)) throw InvalidArgument("phantom-gen: jitter must be >= 0");
  const auto levels = parse_severity_mix(options.severity_mix);
  phantom::PhantomSpec base = options.base;
  base.validate();
  const std::int64_t train_count =
      options.train_count ? *options.train_count : std::llround(0.7 * static_cast<double>(options.count));
  if (train_count < 0 || train_count > options.count) throw InvalidArgument("phantom-gen: train count out of range");

  std::vector<double> weights;
  for (const auto& l : levels) weights.push_back(l.weight);
  const auto per_level = apportion(options.count, weights);
  std::vector<std::size_t> level_of;
  for (std::size_t l = 0; l < levels.size(); ++l) level_of.insert(level_of.end(), static_cast<std::size_t>(per_level[l]), l);
  std::mt19937_64 tag_rng(derive_seed(options.seed, kTagStream));
  std::shuffle(level_of.begin(), level_of.end(), tag_rng);

  std::vector<std::string> tags;
  for (auto l : level_of) tags.push_back(levels[l].tag);
  const auto splits = stratified_split(tags, train_count, options.seed);

  fs::create_directories(options.out_dir / "raw");
  DatasetManifest manifest;
  manifest.stage = DataStage::raw;
  manifest.slice_h = base.height;
  manifest.slice_w = base.width;
  manifest.config_hash = options.config_hash;
  manifest.base_dir = options.out_dir;
  for (std::int64_t i = 0; i < options.count; ++i) {
    const auto& level = levels[level_of[static_cast<std::size_t>(i)]];
    std::mt19937_64 jitter_rng(derive_seed(options.seed, kJitterStream + static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> jitter(-options.severity_jitter, options.severity_jitter);
    phantom::PhantomSpec spec = base;
    spec.severity = std::clamp(level.severity + jitter(jitter_rng), 0.0, 1.0);
    spec.seed = derive_seed(options.seed, kPairStream + static_cast<std::uint64_t>(i));
    const auto pair = phantom::make_phantom_pair(spec);
    ManifestEntry entry;
    entry.id = pair_id(i, options.count);
    entry.x_path = "raw/" + entry.id + "_x.jxt";
    entry.y_path = "raw/" + entry.id + "_y.jxt";
    entry.severity_tag = level.tag;
    entry.split = splits[static_cast<std::size_t>(i)];
    io::save_tensor(options.out_dir / entry.x_path, pair.image);
    io::save_tensor(options.out_dir / entry.y_path, jmap_tensor(pair.jmap));
    manifest.entries.push_back(std::move(entry));
  }
  manifest.save(options.out_dir / "manifest.json");
  return manifest;
}

DatasetManifest preprocess_dataset(const DatasetManifest& input, const PreprocessOptions& options) {
  if (options.target_h < 1 || options.target_w < 1) throw InvalidArgument("preprocess: target size must be >= 1");
  DatasetManifest out;
  out.stage = DataStage::processed;
  out.slice_h = options.target_h;
  out.slice_w = options.target_w;
  out.config_hash = options.config_hash.empty() ? input.config_hash : options.config_hash;
  out.base_dir = options.out_dir;

  const bool already = input.stage == DataStage::processed;
  if (already) {
    out.clip_stats = input.clip_stats;
  } else {
    std::vector<Tensor> maps;
    for (const auto* e : input.entries_in(options.stats_split)) maps.push_back(io::load_tensor(input.resolve(e->y_path)));
    if (maps.empty()) throw ValidationError("preprocess: split '" + to_string(options.stats_split) + "' is empty");
    out.clip_stats = compute_clip_stats(maps, options.stats_split);
    if (out.clip_stats->source != Split::train) {
      throw ValidationError("preprocess: clip statistics must come from the training split");
    }
  }

  fs::create_directories(options.out_dir / "processed");
  for (const auto& e : input.entries) {
    const Tensor x = io::load_tensor(input.resolve(e.x_path));
    const Tensor y = io::load_tensor(input.resolve(e.y_path));
    if (x.ndim() != 2 || x.shape() != y.shape()) {
      throw ValidationError("preprocess: entry '" + e.id + "' is not a matching pair of [H,W] slices");
    }
    const Tensor px = already ? crop_or_pad(x, options.target_h, options.target_w, kBackground)
                              : preprocess_image(x, options.target_h, options.target_w);
    const Tensor py = already ? crop_or_pad(y, options.target_h, options.target_w, kBackground)
                              : preprocess_jacobian(y, *out.clip_stats, options.target_h, options.target_w);
    ManifestEntry pe = e;
    pe.x_path = "processed/" + e.id + "_x.jxt";
    pe.y_path = "processed/" + e.id + "_y.jxt";
    io::save_tensor(options.out_dir / pe.x_path, px);
    io::save_tensor(options.out_dir / pe.y_path, py);
    out.entries.push_back(std::move(pe));
  }
  out.save(options.out_dir / "manifest.json");
  return out;
}

}  // namespace jexpand
