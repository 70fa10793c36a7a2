#include <doctest.h>

#include <fstream>
#include <set>

#include "helpers.hpp"
#include "jexpand/dataset.hpp"
#include "jexpand/error.hpp"
#include "jexpand/preprocess.hpp"
#include "jexpand/tensor_io.hpp"

using namespace jexpand;
using testing::TempDir;
using testing::values;

TEST_CASE("hu clipping and rescale round trip") {
  const Tensor hu = Tensor::from_data({4}, {-3000, -1024, 0, 2000});
  CHECK(values(clip_hu(hu)) == std::vector<float>{-1024, -1024, 0, 1024});
  const Tensor unit = rescale_to_unit(clip_hu(hu), kHuMin, kHuMax);
  CHECK(values(unit) == std::vector<float>{-1, -1, 0, 1});
  const Tensor back = rescale_from_unit(unit, kHuMin, kHuMax);
  CHECK(values(back) == values(clip_hu(hu)));
  CHECK(rescale_value_from_unit(0.0f, 1.0, 3.0) == 2.0f);
  CHECK_THROWS_AS(rescale_to_unit(hu, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("clip stats come from the training split only") {
  const std::vector<Tensor> maps{Tensor::from_data({2}, {1, 3}), Tensor::from_data({2}, {2, 2})};
  const ClipStats s = compute_clip_stats(maps, Split::train);
  CHECK(s.mu == doctest::Approx(2.0));
  CHECK(s.sigma == doctest::Approx(0.5));
  CHECK(s.n_train == 2);
  CHECK(s.lower() == doctest::Approx(0.5));
  CHECK(values(clip_j(Tensor::from_data({3}, {0, 2, 9}), s)) == std::vector<float>{0.5f, 2, 3.5f});
  const ClipStats t = compute_clip_stats(maps, Split::test);
  CHECK_THROWS_AS(clip_j(maps[0], t), ValidationError);
  CHECK_THROWS_AS(compute_clip_stats({}, Split::train), ValidationError);
}

TEST_CASE("crop or pad is centered with the extra row at the bottom") {
  const Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor p = crop_or_pad(t, 5, 3);
  CHECK(p.shape() == Shape{5, 3});
  CHECK(values(p) == std::vector<float>{-1, -1, -1, 1, 2, 3, 4, 5, 6, -1, -1, -1, -1, -1, -1});
  const Tensor c = crop_or_pad(t, 2, 1);
  CHECK(values(c) == std::vector<float>{2, 5});
  const Tensor m = crop_or_pad(t, 1, 4);
  CHECK(m.shape() == Shape{1, 4});
  CHECK(values(crop_or_pad(t, 2, 3)) == values(t));
}

TEST_CASE("preprocessed slices land in [-1, 1]") {
  const Tensor img = testing::uniform({10, 10}, 3, -2000, 2000);
  const Tensor x = preprocess_image(img, 16, 16);
  CHECK(x.shape() == Shape{16, 16});
  for (float v : x.data()) CHECK((v >= -1.0f && v <= 1.0f));
  const ClipStats s{1.0, 0.2, 4, Split::train};
  const Tensor y = preprocess_jacobian(testing::uniform({16, 16}, 4, 0, 3), s, 12, 12);
  for (float v : y.data()) CHECK((v >= -1.0f && v <= 1.0f));
}

TEST_CASE("tensor files round trip bit-exactly") {
  TempDir dir("io");
  const Tensor t = testing::uniform({3, 1, 4, 5}, 9, -1e6f, 1e6f);
  io::save_tensor(dir / "t.jxt", t);
  const Tensor r = io::load_tensor(dir / "t.jxt");
  CHECK(r.shape() == t.shape());
  CHECK(values(r) == values(t));
  CHECK(std::filesystem::file_size(dir / "t.jxt") == io::kTensorHeaderBytes + 4 * 4 + 60 * 4);
}

TEST_CASE("tensor file errors are distinguishable") {
  TempDir dir("io_err");
  const Tensor t = Tensor::full({2, 2}, 1.0f);
  io::save_tensor(dir / "ok.jxt", t);
  std::string bytes = testing::read_file(dir / "ok.jxt");
  auto write = [&](const std::string& name, const std::string& b) {
    std::ofstream(dir / name, std::ios::binary) << b;
    return dir / name;
  };
  CHECK_THROWS_AS(io::load_tensor(dir / "missing.jxt"), IoError);
  CHECK_THROWS_AS(io::load_tensor(write("magic.jxt", "NOPE" + bytes.substr(4))), BadMagicError);
  std::string rev = bytes;
  rev[3] = '9';
  CHECK_THROWS_AS(io::load_tensor(write("rev.jxt", rev)), VersionMismatchError);
  std::string ver = bytes;
  ver[4] = 7;
  CHECK_THROWS_AS(io::load_tensor(write("ver.jxt", ver)), VersionMismatchError);
  CHECK_THROWS_AS(io::load_tensor(write("short.jxt", bytes.substr(0, bytes.size() - 3))), TruncatedFileError);
  CHECK_THROWS_AS(io::load_tensor(write("hdr.jxt", bytes.substr(0, 10))), TruncatedFileError);
  CHECK_THROWS_AS(io::load_tensor(write("long.jxt", bytes + "xx")), FormatError);
}

namespace {

DatasetManifest write_processed(const std::filesystem::path& dir, int n_train, int n_test) {
  DatasetManifest m;
  m.stage = DataStage::processed;
  m.slice_h = m.slice_w = 8;
  m.clip_stats = ClipStats{1.0, 0.1, n_train, Split::train};
  m.config_hash = "0123456789abcdef";
  for (int i = 0; i < n_train + n_test; ++i) {
    ManifestEntry e;
    e.id = "p" + std::to_string(i);
    e.x_path = e.id + "_x.jxt";
    e.y_path = e.id + "_y.jxt";
    e.severity_tag = i % 2 ? "low" : "high";
    e.split = i < n_train ? Split::train : Split::test;
    io::save_tensor(dir / e.x_path, testing::uniform({8, 8}, i));
    io::save_tensor(dir / e.y_path, testing::uniform({8, 8}, 100 + i));
    m.entries.push_back(e);
  }
  m.save(dir / "manifest.json");
  return m;
}

}  // namespace

TEST_CASE("manifest save and load") {
  TempDir dir("manifest");
  const auto m = write_processed(dir.path(), 6, 2);
  const auto r = DatasetManifest::load(dir / "manifest.json");
  CHECK(r.stage == DataStage::processed);
  CHECK(r.entries.size() == 8);
  CHECK(r.entries_in(Split::test).size() == 2);
  CHECK(r.clip_stats->mu == 1.0);
  CHECK(r.config_hash == m.config_hash);
  CHECK(r.base_dir == dir.path());
  const auto train = load_split(r, Split::train);
  CHECK(train.size() == 6);
  CHECK(values(train[1].x) == values(testing::uniform({8, 8}, 1)));
}

TEST_CASE("manifest validation") {
  TempDir dir("manifest_bad");
  auto m = write_processed(dir.path(), 3, 0);
  CHECK_THROWS_AS(load_split(DatasetManifest::load(dir / "manifest.json"), Split::test), ValidationError);
  m.entries.push_back(m.entries[0]);
  CHECK_THROWS_AS(m.validate(false), ValidationError);
  m.entries.pop_back();
  m.clip_stats->source = Split::test;
  CHECK_THROWS_AS(m.validate(false), ValidationError);
  m.clip_stats->source = Split::train;
  m.entries[0].x_path = "gone.jxt";
  CHECK_THROWS_AS(m.validate(true), IoError);
  std::ofstream(dir / "junk.json") << "{\"format\":\"jexpand.manifest\",\"bogus\":1}";
  CHECK_THROWS_AS(DatasetManifest::load(dir / "junk.json"), ValidationError);
  CHECK_THROWS_AS(DatasetManifest::load(dir / "nothing.json"), IoError);
}

TEST_CASE("batches cover the split once per epoch, deterministically") {
  const BatchIterator it(10, 4, 123);
  CHECK(it.batches_per_epoch() == 2);
  const auto e0 = it.epoch(0);
  CHECK(e0 == it.epoch(0));
  CHECK(e0 != it.epoch(1));
  std::set<std::int64_t> seen;
  for (const auto& b : e0) {
    CHECK(b.size() == 4);
    seen.insert(b.begin(), b.end());
  }
  CHECK(seen.size() == 8);
  CHECK(*seen.rbegin() < 10);
  CHECK_THROWS_AS(BatchIterator(10, 3, 1), ValidationError);
  CHECK_THROWS_AS(BatchIterator(0, 2, 1), ValidationError);
}

TEST_CASE("make_batch stacks samples as [B,1,H,W]") {
  const auto pairs = testing::synthetic_pairs(3, 8);
  const Batch b = make_batch(pairs, {2, 0});
  CHECK(b.x.shape() == Shape{2, 1, 8, 8});
  CHECK(b.x.data()[0] == pairs[2].x.data()[0]);
  CHECK(b.y.data()[64] == pairs[0].y.data()[0]);
  CHECK(b.indices == std::vector<std::int64_t>{2, 0});
}
