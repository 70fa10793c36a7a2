#include "jexpand/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "jexpand/checkpoint.hpp"
#include "jexpand/error.hpp"
#include "jexpand/log.hpp"
#include "jexpand/losses.hpp"
#include "jexpand/random.hpp"

namespace jexpand::train {

namespace {

constexpr std::uint64_t kGeneratorStream = 1;
constexpr std::uint64_t kDiscriminatorStream = 2;
constexpr std::uint64_t kBatchStream = 3;

AdamConfig adam_config(double lr, const TrainConfig& c) {
  return {static_cast<float>(lr), static_cast<float>(c.beta1), static_cast<float>(c.beta2), 1e-8f};
}

std::optional<nets::Discriminator> make_discriminator(const nets::ModelSpec& spec, std::uint64_t seed) {
  if (!spec.discriminator) return std::nullopt;
  return nets::Discriminator(*spec.discriminator, derive_seed(seed, kDiscriminatorStream));
}

std::string checkpoint_name(int epoch) {
  std::ostringstream os;
  os << "epoch_";
  os.width(4);
  os.fill('0');
  os << epoch;
  return os.str();
}

std::string format_row(const EpochLog& e) {
  std::ostringstream os;
  os.precision(9);
  os << e.epoch << ',' << e.k << ',' << e.d_loss << ',' << e.g_adv << ',' << e.g_ch << ',';
  os.precision(4);
  os << std::fixed << e.seconds;
  return os.str();
}

// Rows of an existing log that precede `start_epoch`, so a resumed run keeps
// the original wall times.
std::vector<std::string> earlier_rows(const std::filesystem::path& path, int start_epoch) {
  std::vector<std::string> rows;
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line)) return rows;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    try {
      if (std::stoi(line.substr(0, comma)) < start_epoch) rows.push_back(line);
    } catch (const std::exception&) {
    }
  }
  return rows;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("train.epochs must be >= 0");
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw ValidationError("train.batch_size must be even and >= 2, got " + std::to_string(batch_size));
  }
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ValidationError("learning rates must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("Adam betas must lie in [0, 1)");
  }
  if (checkpoint_every < 0) throw ValidationError("train.checkpoint_every must be >= 0");
}

int k_for_epoch(int epoch, int batch_size, int total_epochs) {
  if (batch_size < 2 || batch_size % 2 != 0) throw InvalidArgument("k_for_epoch: batch size must be even");
  if (total_epochs < 1) throw InvalidArgument("k_for_epoch: total_epochs must be >= 1");
  const int half = batch_size / 2;
  const int last_decade = std::max(1, (total_epochs - 1) / 10);
  const int step = (half + last_decade - 1) / last_decade;
  return std::max(half, batch_size - (std::max(epoch, 0) / 10) * step);
}

std::vector<std::int64_t> select_top_k(std::span<const double> scores, int k) {
  const auto n = static_cast<std::int64_t>(scores.size());
  if (k < 1 || k > n) throw InvalidArgument("select_top_k: k must lie in [1, " + std::to_string(n) + "]");
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int64_t a, std::int64_t b) { return scores[a] > scores[b]; });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<double> per_sample_scores(const Tensor& score_map) {
  if (score_map.ndim() != 4 || score_map.dim(1) != 1) {
    throw ShapeError("per_sample_scores: expected [N,1,h,w], got " + shape_to_string(score_map.shape()));
  }
  const std::int64_t n = score_map.dim(0), hw = score_map.dim(2) * score_map.dim(3);
  const auto v = score_map.data();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::int64_t j = 0; j < hw; ++j) acc += v[i * hw + j];
    out[i] = acc / static_cast<double>(hw);
  }
  return out;
}

TrainState::TrainState(nets::ModelSpec spec_in, TrainConfig config_in)
    : spec(std::move(spec_in)),
      config(config_in),
      generator(spec.generator, derive_seed(config.seed, kGeneratorStream)),
      discriminator(make_discriminator(spec, config.seed)) {
  config.validate();
  if (config.model_kind != spec.kind) throw ValidationError("train config and model spec disagree on the model kind");
  if (config.drs_enabled && !discriminator) throw ValidationError("top-k selection needs a discriminator");
  adam_g.config = adam_config(config.lr_g, config);
  adam_d.config = adam_config(config.lr_d, config);
}

StepStats train_step(TrainState& state, const Batch& batch, int k) {
  const std::int64_t b = batch.x.dim(0);
  if (b != state.config.batch_size) {
    throw ShapeError("train_step: batch of " + std::to_string(b) + " samples, configured batch size " +
                     std::to_string(state.config.batch_size));
  }
  if (k < 1 || k > b) throw InvalidArgument("train_step: k out of range");
  const auto& spec = state.spec;
  auto& g = state.generator;
  StepStats stats;
  stats.k = state.config.drs_enabled ? k : static_cast<int>(b);

  g.params().params.zero_grad();
  Tensor fake = g.forward(batch.x, true);

  if (state.discriminator) {
    auto& d = *state.discriminator;
    auto& dp = d.params().params;
    dp.set_requires_grad(true);
    dp.zero_grad();
    const Tensor fake_blocked = fake.detach();
    const Tensor real_score = d.forward(batch.x, batch.y, true);
    const Tensor fake_score = d.forward(batch.x, fake_blocked, true);
    const Tensor d_loss = spec.adversarial == nets::AdversarialKind::bce ? losses::bce_d_loss(real_score, fake_score)
                                                                         : losses::lsgan_d_loss(real_score, fake_score);
    stats.d_loss = d_loss.item();
    if (std::isfinite(stats.d_loss)) {
      d_loss.backward();
      stats.d_skipped = !adam_step(dp, state.adam_d);
    } else {
      stats.d_skipped = true;
      ++state.adam_d.skipped_steps;
      log::warn("step " + std::to_string(state.global_step) + ": non-finite discriminator loss, update skipped");
    }
    dp.zero_grad();
  }

  Tensor g_loss;
  if (state.discriminator) {
    auto& d = *state.discriminator;
    auto& dp = d.params().params;
    dp.set_requires_grad(false);
    Tensor score = d.forward(batch.x, fake, true);
    Tensor pred = fake, target = batch.y;
    if (stats.k < b) {
      stats.kept = select_top_k(per_sample_scores(score), stats.k);
      score = index_select(score, stats.kept);
      pred = index_select(fake, stats.kept);
      target = index_select(batch.y, stats.kept);
    } else {
      stats.kept.resize(static_cast<std::size_t>(b));
      std::iota(stats.kept.begin(), stats.kept.end(), 0);
    }
    if (spec.adversarial == nets::AdversarialKind::bce) {
      const Tensor adv = losses::bce_g_loss(score);
      const Tensor rec = losses::l1_loss(pred, target);
      g_loss = add(adv, mul_scalar(rec, spec.loss.lambda_recon));
      stats.g_adv = adv.item();
      stats.g_recon = rec.item();
    } else {
      const auto parts = losses::generator_total_loss(score, pred, target, spec.loss);
      g_loss = parts.total;
      stats.g_adv = parts.adversarial.item();
      stats.g_recon = parts.reconstruction.item();
    }
  } else {
    stats.kept.resize(static_cast<std::size_t>(b));
    std::iota(stats.kept.begin(), stats.kept.end(), 0);
    const Tensor structural = losses::ssim_loss(fake, batch.y);
    const Tensor rec = losses::l1_loss(fake, batch.y);
    g_loss = add(structural, mul_scalar(rec, spec.loss.lambda_recon));
    stats.g_adv = structural.item();
    stats.g_recon = rec.item();
  }

  if (std::isfinite(g_loss.item())) {
    g_loss.backward();
    stats.g_skipped = !adam_step(g.params().params, state.adam_g);
  } else {
    stats.g_skipped = true;
    ++state.adam_g.skipped_steps;
    log::warn("step " + std::to_string(state.global_step) + ": non-finite generator loss, update skipped");
  }
  g.params().params.zero_grad();
  if (state.discriminator) state.discriminator->params().params.set_requires_grad(true);
  ++state.global_step;
  return stats;
}

FitResult fit(TrainState& state, const std::vector<SamplePair>& train, const FitOptions& options) {
  namespace fs = std::filesystem;
  const auto& cfg = state.config;
  if (options.out_dir.empty()) throw InvalidArgument("fit: output directory required");
  if (state.epoch > cfg.epochs) throw ValidationError("fit: checkpoint is past the configured epoch count");
  for (const auto& s : train) {
    if (s.x.dim(0) != state.spec.generator.slice_size || s.x.dim(1) != state.spec.generator.slice_size) {
      throw ValidationError("fit: sample '" + s.id + "' does not match the generator slice size " +
                            std::to_string(state.spec.generator.slice_size));
    }
  }
  fs::create_directories(options.out_dir);
  const BatchIterator batches(static_cast<std::int64_t>(train.size()), cfg.batch_size,
                              derive_seed(cfg.seed, kBatchStream));
  if (batches.batches_per_epoch() < 1 && cfg.epochs > state.epoch) {
    throw ValidationError("fit: fewer training samples than one batch");
  }

  const fs::path log_path = options.out_dir / "train_log.csv";
  std::vector<std::string> rows = earlier_rows(log_path, state.epoch);
  if (rows.size() != static_cast<std::size_t>(state.epoch)) {
    rows.clear();
    for (const auto& e : state.history) rows.push_back(format_row(e));
  }
  auto write_log = [&] {
    std::ofstream out(log_path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + log_path.string());
    out << kTrainLogHeader << '\n';
    for (const auto& r : rows) out << r << '\n';
    if (!out) throw IoError("short write to " + log_path.string());
  };
  write_log();

  FitResult result;
  while (state.epoch < cfg.epochs) {
    const auto start = std::chrono::steady_clock::now();
    EpochLog entry;
    entry.epoch = state.epoch;
    entry.k = cfg.drs_enabled ? k_for_epoch(state.epoch, cfg.batch_size, cfg.epochs) : cfg.batch_size;
    const auto order = batches.epoch(state.epoch);
    for (const auto& idx : order) {
      const auto step = train_step(state, make_batch(train, idx), entry.k);
      entry.d_loss += step.d_loss;
      entry.g_adv += step.g_adv;
      entry.g_ch += step.g_recon;
    }
    const auto n = static_cast<double>(std::max<std::size_t>(order.size(), 1));
    entry.d_loss /= n;
    entry.g_adv /= n;
    entry.g_ch /= n;
    ++state.epoch;
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    state.history.push_back(entry);
    result.log.push_back(entry);
    rows.push_back(format_row(entry));
    write_log();
    if (options.on_epoch) options.on_epoch(entry);
    if (cfg.checkpoint_every > 0 && state.epoch % cfg.checkpoint_every == 0) {
      ckpt::save_checkpoint(options.out_dir / checkpoint_name(state.epoch), state, options.config_hash);
    }
  }
  result.final_checkpoint = options.out_dir / "final";
  ckpt::save_checkpoint(result.final_checkpoint, state, options.config_hash);
  return result;
}

}  // namespace jexpand::train
