#include <doctest.h>

#include <string>

#include "helpers.hpp"
#include "jexpand/config.hpp"
#include "jexpand/error.hpp"

using namespace jexpand;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("paper preset carries the loss constants verbatim") {
  const auto c = parse_config(R"({"preset": "paper"})");
  REQUIRE(c.lambda.has_value());
  CHECK(*c.lambda == 200.0);
  CHECK(*c.eps == 1e-6);
  const auto spec = c.model_spec();
  CHECK(spec.loss.lambda_recon == 200.0f);
  CHECK(spec.loss.eps_charbonnier == 1e-6);
  CHECK(c.train.batch_size == 64);
  CHECK(c.train.lr_g == 2e-4);
  CHECK(c.train.lr_d == 1e-4);
  CHECK(c.generator.depth == 8);
  CHECK(c.generator.slice_size == 256);
  // Read back from the canonical text as well.
  const auto again = parse_config(to_json_string(c));
  CHECK(*again.lambda == 200.0);
  CHECK(*again.eps == 1e-6);
}

TEST_CASE("desk preset") {
  const auto c = preset_config("desk");
  CHECK(c.train.epochs == 200);
  CHECK(c.train.batch_size == 16);
  CHECK(c.generator.slice_size == 64);
  CHECK(c.phantom.count == 650);
  CHECK(c.resolved_train().drs_enabled);
  CHECK_THROWS_AS(preset_config("huge"), InvalidArgument);
}

TEST_CASE("config round trip is lossless") {
  auto c = preset_config("desk");
  c.model = nets::ModelKind::pix2pix;
  c.seed = 99;
  c.train.epochs = 7;
  c.lambda.reset();
  c.generator_norm = nets::NormKind::none;
  c.phantom.train_count = 11;
  c.manifest = "d/manifest.json";
  const std::string text = to_json_string(c);
  const auto back = parse_config(text);
  CHECK(to_json_string(back) == text);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(back.model_spec().loss.lambda_recon == 100.0f);
  CHECK(back.model_spec().generator.norm == nets::NormKind::none);
}

TEST_CASE("overrides replace preset values") {
  const auto c = parse_config(R"({"model": "ours", "train": {"epochs": 3, "drs_enabled": true}, "loss": {"lambda": 50}})");
  CHECK(c.train.epochs == 3);
  CHECK(c.train.batch_size == 16);
  CHECK(c.model_spec().drs);
  CHECK(c.model_spec().loss.lambda_recon == 50.0f);
  const auto u = parse_config(R"({"model": "unet_ssim", "loss": {"lambda": null}})");
  CHECK(u.model_spec().loss.lambda_recon == 1.0f);
  CHECK_FALSE(u.resolved_train().drs_enabled);
}

TEST_CASE("hash changes with any field") {
  const auto a = preset_config("desk");
  auto b = a;
  b.train.lr_g = 3e-4;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("unknown keys are rejected with their line") {
  const std::string text = "{\n  \"train\": {\n    \"epochs\": 3,\n    \"epoch_count\": 4\n  }\n}";
  const std::string e = error_of(text);
  CHECK(e.find("epoch_count") != std::string::npos);
  CHECK(e.find("line 4") != std::string::npos);
  CHECK(error_of(R"({"colour": 1})").find("colour") != std::string::npos);
}

TEST_CASE("syntax errors report line and column") {
  const std::string e = error_of("{\n  \"seed\": 1,\n  \"model\" \"ours\"\n}");
  CHECK(e.find("cfg.json:3:") != std::string::npos);
}

TEST_CASE("bad values are config errors") {
  CHECK_FALSE(error_of(R"({"train": {"batch_size": 5}})").empty());
  CHECK_FALSE(error_of(R"({"model": "gan"})").empty());
  CHECK_FALSE(error_of(R"({"loss": {"eps": 0}})").empty());
  CHECK_FALSE(error_of(R"({"generator": {"slice_size": 50}})").empty());
  CHECK_FALSE(error_of(R"({"model": "unet_ssim", "train": {"drs_enabled": true}})").empty());
  CHECK_FALSE(error_of(R"({"train": {"epochs": "ten"}})").empty());
  CHECK_FALSE(error_of("[1, 2]").empty());
}

TEST_CASE("load_config reads files") {
  testing::TempDir dir("config");
  std::ofstream(dir / "c.json") << R"({"seed": 12})";
  CHECK(load_config(dir / "c.json").seed == 12);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), IoError);
}
