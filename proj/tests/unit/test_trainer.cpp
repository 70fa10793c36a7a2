#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "jexpand/checkpoint.hpp"
#include "jexpand/error.hpp"
#include "jexpand/log.hpp"
#include "jexpand/trainer.hpp"
#include "oracles.hpp"

using namespace jexpand;
using namespace jexpand::train;
using nets::ModelKind;
using testing::TempDir;

namespace {

std::vector<float> all_params(const TrainState& s) {
  auto v = s.generator.params().params.flatten();
  if (s.discriminator) {
    const auto d = s.discriminator->params().params.flatten();
    v.insert(v.end(), d.begin(), d.end());
  }
  return v;
}

TrainState tiny_state(ModelKind kind, int epochs, int batch = 4, std::uint64_t seed = 5) {
  return TrainState(testing::tiny_spec(kind), testing::tiny_train(kind, epochs, batch, seed));
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("k schedule endpoints") {
  for (int b : {16, 64}) {
    for (int t : {50, 200}) {
      CHECK(k_for_epoch(0, b, t) == b);
      CHECK(k_for_epoch(t - 1, b, t) == b / 2);
      int prev = b;
      for (int e = 0; e < t; ++e) {
        const int k = k_for_epoch(e, b, t);
        CHECK(k <= prev);
        CHECK(k >= b / 2);
        if (e % 10 != 0) CHECK(k == prev);
        prev = k;
      }
    }
  }
}

TEST_CASE("k schedule steps") {
  std::vector<int> ks;
  for (int e = 0; e < 50; e += 10) ks.push_back(k_for_epoch(e, 64, 50));
  CHECK(ks == std::vector<int>{64, 56, 48, 40, 32});
  for (int e = 0; e < 10; ++e) CHECK(k_for_epoch(e, 16, 10) == 16);
  CHECK(k_for_epoch(0, 16, 1) == 16);
  CHECK(k_for_epoch(10, 16, 11) == 8);
  CHECK_THROWS_AS(k_for_epoch(0, 15, 50), InvalidArgument);
}

TEST_CASE("top-k selection equals the sort oracle") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 63;
    std::vector<double> s(n);
    // Coarse values on odd trials produce ties.
    for (auto& v : s) v = trial % 2 ? double(rng() % 5) : double(rng() % 100000) / 1000.0;
    const int k = 1 + static_cast<int>(rng() % n);
    CHECK(select_top_k(s, k) == oracle::top_k(s, k));
  }
  const std::vector<double> s{1, 2};
  CHECK_THROWS_AS(select_top_k(s, 0), InvalidArgument);
  CHECK_THROWS_AS(select_top_k(s, 3), InvalidArgument);
}

TEST_CASE("per-sample scores average the patch map") {
  const Tensor m = Tensor::from_data({2, 1, 1, 2}, {1, 3, -1, 0});
  CHECK(per_sample_scores(m) == std::vector<double>{2.0, -0.5});
  CHECK_THROWS_AS(per_sample_scores(Tensor::zeros({2, 2, 1, 1})), ShapeError);
}

TEST_CASE("k = B is bit-identical to training without top-k") {
  const auto data = testing::synthetic_pairs(8);
  const Batch batch = make_batch(data, {0, 1, 2, 3});
  TrainState with = tiny_state(ModelKind::ours_drs, 1);
  TrainState without = tiny_state(ModelKind::ours, 1);
  REQUIRE(all_params(with) == all_params(without));
  for (int i = 0; i < 3; ++i) {
    const auto a = train_step(with, batch, 4);
    const auto b = train_step(without, batch, 4);
    CHECK(a.kept == b.kept);
    CHECK(a.g_adv == b.g_adv);
    CHECK(a.d_loss == b.d_loss);
  }
  CHECK(all_params(with) == all_params(without));

  TempDir d1("drs_on"), d2("drs_off");
  TrainState f1 = tiny_state(ModelKind::ours_drs, 3), f2 = tiny_state(ModelKind::ours, 3);
  fit(f1, data, {d1.path(), "h", {}});
  fit(f2, data, {d2.path(), "h", {}});
  CHECK(all_params(f1) == all_params(f2));
}

TEST_CASE("top-k keeps the best-scored samples") {
  const auto data = testing::synthetic_pairs(8);
  const Batch batch = make_batch(data, {0, 1, 2, 3});
  TrainState s = tiny_state(ModelKind::ours_drs, 1);
  TrainState probe = tiny_state(ModelKind::ours_drs, 1);
  const auto st = train_step(s, batch, 2);
  CHECK(st.k == 2);
  CHECK(st.kept.size() == 2);
  CHECK(std::is_sorted(st.kept.begin(), st.kept.end()));

  // Replay the step on a copy to find which samples the discriminator
  // preferred after its own update.
  const Tensor fake = probe.generator.forward(batch.x, true);
  (void)train_step(probe, batch, 4);
  TrainState again = tiny_state(ModelKind::ours_drs, 1);
  const auto full = train_step(again, batch, 4);
  CHECK(full.kept == std::vector<std::int64_t>{0, 1, 2, 3});
  CHECK(all_params(s) != all_params(again));
}

TEST_CASE("discriminator update leaves generator gradients at zero") {
  auto spec = testing::tiny_spec(ModelKind::ours);
  nets::Generator g(spec.generator, 1);
  nets::Discriminator d(*spec.discriminator, 2);
  const Batch batch = make_batch(testing::synthetic_pairs(4), {0, 1, 2, 3});
  const Tensor fake = g.forward(batch.x, true);
  const Tensor loss = losses::lsgan_d_loss(d.forward(batch.x, batch.y), d.forward(batch.x, fake.detach()));
  loss.backward();
  for (auto& [name, p] : g.params().params) {
    for (float v : p.grad()) CHECK(v == 0.0f);
  }
  bool any = false;
  for (auto& [name, p] : d.params().params) {
    for (float v : p.grad()) any = any || v != 0.0f;
  }
  CHECK(any);
}

TEST_CASE("train step leaves no stale gradients and updates both networks") {
  const Batch batch = make_batch(testing::synthetic_pairs(4), {0, 1, 2, 3});
  for (auto kind : {ModelKind::ours, ModelKind::pix2pix, ModelKind::unet_ssim}) {
    TrainState s = tiny_state(kind, 1);
    const auto g0 = s.generator.params().params.flatten();
    const auto st = train_step(s, batch, 4);
    CHECK_FALSE(st.g_skipped);
    CHECK(std::isfinite(st.g_adv));
    CHECK(s.generator.params().params.flatten() != g0);
    CHECK(s.global_step == 1);
    CHECK(s.adam_g.step_count == 1);
    for (auto& [n, p] : s.generator.params().params) {
      for (float v : p.grad()) CHECK(v == 0.0f);
    }
    if (s.discriminator) {
      CHECK(s.adam_d.step_count == 1);
      for (auto& [n, p] : s.discriminator->params().params) {
        CHECK(p.requires_grad());
        for (float v : p.grad()) CHECK(v == 0.0f);
      }
    }
  }
}

TEST_CASE("non-finite losses skip the update and warn") {
  const Batch batch = make_batch(testing::synthetic_pairs(4), {0, 1, 2, 3});
  TrainState s = tiny_state(ModelKind::ours, 1);
  s.generator.params().params.at("dec0.convt.bias").mutable_data()[0] = std::numeric_limits<float>::quiet_NaN();
  const auto before = all_params(s);
  int warnings = 0;
  auto old = log::set_sink([&](log::Level l, const std::string&) { warnings += l == log::Level::warning; });
  const auto st = train_step(s, batch, 4);
  log::set_sink(old);
  CHECK(st.d_skipped);
  CHECK(st.g_skipped);
  CHECK(s.adam_g.skipped_steps == 1);
  CHECK(s.adam_d.skipped_steps == 1);
  CHECK(warnings == 2);
  const auto after = all_params(s);
  REQUIRE(after.size() == before.size());
  for (std::size_t i = 0; i < after.size(); ++i) CHECK((after[i] == before[i] || std::isnan(before[i])));
}

TEST_CASE("train step checks the batch") {
  TrainState s = tiny_state(ModelKind::ours, 1);
  const auto data = testing::synthetic_pairs(4);
  CHECK_THROWS_AS(train_step(s, make_batch(data, {0, 1}), 2), ShapeError);
  CHECK_THROWS_AS(train_step(s, make_batch(data, {0, 1, 2, 3}), 5), InvalidArgument);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.batch_size = 3;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.lr_g = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.epochs = -1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  auto tc = testing::tiny_train(ModelKind::unet_ssim, 1);
  tc.drs_enabled = true;
  CHECK_THROWS_AS(TrainState(testing::tiny_spec(ModelKind::unet_ssim), tc), ValidationError);
  CHECK_THROWS_AS(TrainState(testing::tiny_spec(ModelKind::ours), testing::tiny_train(ModelKind::pix2pix, 1)),
                  ValidationError);
}

TEST_CASE("fit writes one log row per epoch and the final checkpoint") {
  TempDir dir("fit");
  const auto data = testing::synthetic_pairs(10);
  TrainState s = tiny_state(ModelKind::ours_drs, 12);
  s.config.checkpoint_every = 5;
  std::vector<int> seen;
  const auto r = fit(s, data, {dir.path(), "abc", [&](const EpochLog& e) { seen.push_back(e.epoch); }});
  CHECK(r.log.size() == 12);
  CHECK(seen.size() == 12);
  CHECK(seen.back() == 11);
  CHECK(s.epoch == 12);
  CHECK(s.global_step == 12 * 2);
  CHECK(std::filesystem::exists(dir / "epoch_0005/checkpoint.json"));
  CHECK(std::filesystem::exists(dir / "epoch_0010/checkpoint.json"));
  CHECK(std::filesystem::exists(dir / "final/checkpoint.json"));
  const auto rows = lines(testing::read_file(dir / "train_log.csv"));
  REQUIRE(rows.size() == 13);
  CHECK(rows[0] == kTrainLogHeader);
  CHECK(rows[1].rfind("0,4,", 0) == 0);
  CHECK(rows[12].rfind("11,2,", 0) == 0);
  CHECK(r.log.back().k == 2);
}

TEST_CASE("zero epochs still writes the initial checkpoint") {
  TempDir dir("fit0");
  TrainState s = tiny_state(ModelKind::ours, 0);
  const auto init = all_params(s);
  const auto r = fit(s, testing::synthetic_pairs(4), {dir.path(), "h", {}});
  CHECK(r.log.empty());
  CHECK(lines(testing::read_file(dir / "train_log.csv")).size() == 1);
  const TrainState back = ckpt::load_checkpoint(r.final_checkpoint);
  CHECK(all_params(back) == init);
  CHECK(back.epoch == 0);
}

TEST_CASE("fit rejects unusable inputs") {
  TempDir dir("fit_bad");
  TrainState s = tiny_state(ModelKind::ours, 1);
  CHECK_THROWS_AS(fit(s, testing::synthetic_pairs(3), {dir.path(), "h", {}}), ValidationError);
  CHECK_THROWS_AS(fit(s, testing::synthetic_pairs(4, 32), {dir.path(), "h", {}}), ValidationError);
  CHECK_THROWS_AS(fit(s, testing::synthetic_pairs(4), {"", "h", {}}), InvalidArgument);
}

TEST_CASE("resuming reproduces an uninterrupted run bit for bit") {
  const auto data = testing::synthetic_pairs(12);
  for (auto kind : {ModelKind::ours_drs, ModelKind::pix2pix}) {
    TempDir full("resume_full"), part("resume_part");
    TrainState a = tiny_state(kind, 6);
    a.config.checkpoint_every = 3;
    fit(a, data, {full.path(), "h", {}});

    TrainState b = ckpt::load_checkpoint(full / "epoch_0003");
    CHECK(b.epoch == 3);
    CHECK(b.history.size() == 3);
    fit(b, data, {part.path(), "h", {}});
    CHECK(all_params(a) == all_params(b));
    CHECK(a.adam_g.first_moment == b.adam_g.first_moment);
    CHECK(testing::read_tree(full / "final") == testing::read_tree(part / "final"));
    const auto la = lines(testing::read_file(full / "train_log.csv"));
    const auto lb = lines(testing::read_file(part / "train_log.csv"));
    REQUIRE(la.size() == lb.size());
    for (std::size_t i = 0; i < la.size(); ++i) {
      // Identical except for the wall-time column.
      CHECK(la[i].substr(0, la[i].rfind(',')) == lb[i].substr(0, lb[i].rfind(',')));
    }
  }
}

TEST_CASE("resume in place keeps earlier log rows") {
  TempDir dir("resume_inplace");
  const auto data = testing::synthetic_pairs(8);
  TrainState a = tiny_state(ModelKind::ours, 4);
  a.config.checkpoint_every = 2;
  fit(a, data, {dir.path(), "h", {}});
  const auto before = lines(testing::read_file(dir / "train_log.csv"));
  TrainState b = ckpt::load_checkpoint(dir / "epoch_0002");
  fit(b, data, {dir.path(), "h", {}});
  const auto after = lines(testing::read_file(dir / "train_log.csv"));
  REQUIRE(after.size() == 5);
  CHECK(after[1] == before[1]);
  CHECK(after[2] == before[2]);
}

TEST_CASE("checkpoint round trip") {
  TempDir dir("ckpt");
  const auto data = testing::synthetic_pairs(8);
  TrainState s = tiny_state(ModelKind::pix2pix, 2);
  fit(s, data, {dir / "run", "feedfacefeedface", {}});
  const auto info = ckpt::read_checkpoint_info(dir / "run/final");
  CHECK(info.epoch == 2);
  CHECK(info.global_step == 4);
  CHECK(info.config_hash == "feedfacefeedface");
  CHECK(info.spec.kind == ModelKind::pix2pix);
  CHECK(info.config.batch_size == 4);

  const TrainState r = ckpt::load_checkpoint(dir / "run/final");
  CHECK(all_params(r) == all_params(s));
  CHECK(r.adam_d.second_moment == s.adam_d.second_moment);
  CHECK(r.adam_g.step_count == s.adam_g.step_count);
  REQUIRE_FALSE(r.generator.params().buffers.empty());
  for (const auto& [name, bn] : r.generator.params().buffers) {
    CHECK(bn.initialized);
    CHECK(bn.mean == s.generator.params().buffers.at(name).mean);
    CHECK(bn.var == s.generator.params().buffers.at(name).var);
  }

  nets::Generator g = ckpt::load_generator(dir / "run/final");
  CHECK(g.params().params.flatten() == s.generator.params().params.flatten());
  const Tensor x = make_batch(data, {0}).x;
  CHECK(testing::values(g.forward(x, false)) == testing::values(s.generator.forward(x, false)));
}

TEST_CASE("damaged checkpoints are rejected") {
  TempDir dir("ckpt_bad");
  TrainState s = tiny_state(ModelKind::ours, 0);
  ckpt::save_checkpoint(dir / "c", s, "h");
  CHECK_THROWS_AS(ckpt::load_checkpoint(dir / "nope"), IoError);
  std::filesystem::remove(dir / "c/tensors/G.param.enc0.conv.weight.jxt");
  CHECK_THROWS_AS(ckpt::load_checkpoint(dir / "c"), IoError);
  ckpt::save_checkpoint(dir / "d", s, "h");
  std::ofstream(dir / "d/checkpoint.json") << "{\"format\": \"something else\"}";
  CHECK_THROWS_AS(ckpt::load_checkpoint(dir / "d"), ValidationError);
}
