#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "helpers.hpp"
#include "jexpand/error.hpp"
#include "jexpand/report.hpp"

using namespace jexpand;
using namespace jexpand::eval;
using testing::TempDir;

namespace {

const ClipStats kStats{1.0, 0.25, 10, Split::train};  // J in [0.25, 1.75]

SamplePair pair(const std::string& id, std::vector<float> x, std::vector<float> y, const std::string& tag = "mid") {
  const auto side = static_cast<std::int64_t>(std::lround(std::sqrt(double(x.size()))));
  SamplePair p;
  p.id = id;
  p.severity_tag = tag;
  p.x = Tensor::from_data({side, side}, std::move(x));
  p.y = Tensor::from_data({side, side}, std::move(y));
  return p;
}

std::vector<SamplePair> random_pairs(int n, std::uint64_t seed) {
  std::vector<SamplePair> out;
  for (int i = 0; i < n; ++i) {
    const Tensor x = testing::uniform({16, 16}, seed + 2 * i, -0.9f, 0.9f);
    const Tensor y = testing::uniform({16, 16}, seed + 2 * i + 1, -0.9f, 0.9f);
    out.push_back(pair("s" + std::to_string(100 + i), testing::values(x), testing::values(y), i % 2 ? "low" : "high"));
  }
  return out;
}

MetricsReport report_for(const std::vector<SamplePair>& s, float shift) {
  auto r = evaluate(s, kStats, [shift](const Tensor& x) {
    std::vector<float> v(x.data().begin(), x.data().end());
    for (auto& e : v) e = std::clamp(e * 0.5f + shift, -1.0f, 1.0f);
    return Tensor::from_data(x.shape(), std::move(v));
  });
  r.model = "m" + std::to_string(shift);
  return r;
}

}  // namespace

TEST_CASE("background pixels are those where both x and y are -1") {
  std::vector<float> x(256, -1.0f), y(256, -1.0f), pred(256, 0.0f);
  // One lung pixel with x == -1 but y inside the lung, one with y == -1.
  y[0] = 0.0f;
  x[1] = 0.5f;
  x[2] = 0.2f;
  y[2] = 0.2f;
  const auto s = pair("a", x, y);
  const auto r = evaluate_slice(s, Tensor::from_data({16, 16}, pred), kStats);
  // Lung pixels in J units: targets 1.0, 0.25, 1.15; prediction 1.0 everywhere.
  CHECK(r.mae == doctest::Approx((0.0 + 0.75 + 0.15) / 3).epsilon(1e-6));
  CHECK(r.mean_j == doctest::Approx(1.0));
  CHECK(r.target_mean_j == doctest::Approx((1.0 + 0.25 + 1.15) / 3).epsilon(1e-6));
  CHECK_FALSE(r.spearman_rs.has_value());
  CHECK_THROWS_AS(evaluate_slice(pair("b", std::vector<float>(256, -1.0f), std::vector<float>(256, -1.0f)),
                                 Tensor::from_data({16, 16}, pred), kStats),
                  ValidationError);
}

TEST_CASE("perfect prediction") {
  const auto s = random_pairs(1, 1)[0];
  const auto r = evaluate_slice(s, s.y, kStats);
  CHECK(r.psnr.infinite);
  CHECK(r.ssim == doctest::Approx(1.0));
  CHECK(r.dsc_high == 1.0);
  CHECK(*r.spearman_rs == doctest::Approx(1.0));
  CHECK(r.mae == 0.0);
}

TEST_CASE("constant mean predictor") {
  const auto samples = random_pairs(4, 7);
  const float m = mean_target_value(samples);
  double acc = 0;
  for (const auto& s : samples)
    for (float v : s.y.data()) acc += v;
  CHECK(m == doctest::Approx(acc / (4 * 256)).epsilon(1e-6));
  const auto r = evaluate(samples, kStats, constant_predictor(m));
  for (const auto& rec : r.slices) {
    CHECK_FALSE(rec.spearman_rs.has_value());
    CHECK(rec.sd_j == doctest::Approx(0.0));
  }
}

TEST_CASE("evaluation is ordered by id and independent of thread count") {
  auto samples = random_pairs(9, 3);
  std::reverse(samples.begin(), samples.end());
  const auto a = report_for(samples, 0.1f);
  CHECK(a.slices.front().id == "s100");
  CHECK(std::is_sorted(a.slices.begin(), a.slices.end(),
                       [](const SliceRecord& x, const SliceRecord& y) { return x.id < y.id; }));
  auto b = evaluate(samples, kStats, [](const Tensor& x) {
    std::vector<float> v(x.data().begin(), x.data().end());
    for (auto& e : v) e = std::clamp(e * 0.5f + 0.1f, -1.0f, 1.0f);
    return Tensor::from_data(x.shape(), std::move(v));
  }, 4, 2);
  REQUIRE(b.slices.size() == a.slices.size());
  for (std::size_t i = 0; i < a.slices.size(); ++i) {
    CHECK(a.slices[i].mae == b.slices[i].mae);
    CHECK(a.slices[i].ssim == b.slices[i].ssim);
  }
}

TEST_CASE("report json round trip and csv layout") {
  TempDir dir("report");
  auto r = report_for(random_pairs(5, 11), 0.0f);
  r.slices[0].psnr = {std::numeric_limits<double>::infinity(), true};
  r.slices[1].spearman_rs.reset();
  r.checkpoint = "ck";
  r.config_hash = "0011223344556677";
  write_report_json(dir / "r.json", r);
  write_report_csv(dir / "r.csv", r);
  const auto back = read_report_json(dir / "r.json");
  CHECK(back.model == r.model);
  CHECK(back.config_hash == r.config_hash);
  REQUIRE(back.slices.size() == 5);
  CHECK(back.slices[0].psnr.infinite);
  CHECK_FALSE(back.slices[1].spearman_rs.has_value());
  CHECK(back.slices[2].mae == r.slices[2].mae);
  CHECK(back.slices[3].ssim == r.slices[3].ssim);

  const std::string csv = testing::read_file(dir / "r.csv");
  CHECK(csv.rfind(std::string(kReportCsvHeader) + "\n", 0) == 0);
  CHECK(csv.find("s100,high,inf,") != std::string::npos);
  CHECK(csv.find("s101,low,") != std::string::npos);
  std::ofstream(dir / "bad.json") << "{\"format\":\"other\"}";
  CHECK_THROWS_AS(read_report_json(dir / "bad.json"), ValidationError);
  CHECK_THROWS_AS(read_report_json(dir / "none.json"), IoError);
}

TEST_CASE("summaries skip missing values") {
  const auto s = summarize({1.0, std::numeric_limits<double>::infinity(), 3.0, 5.0});
  CHECK(s.n == 3);
  CHECK(s.missing == 1);
  CHECK(s.mean == 3.0);
  CHECK(s.median == 3.0);
  CHECK(std::isnan(summarize({}).median));
}

TEST_CASE("metric values filter by severity") {
  const auto r = report_for(random_pairs(6, 5), 0.0f);
  CHECK(metric_values(r, "mae").size() == 6);
  CHECK(metric_values(r, "mae", "low").size() == 3);
  CHECK_THROWS_AS(metric_values(r, "auc"), InvalidArgument);
}

TEST_CASE("comparing a report with itself flags nothing") {
  const auto r = report_for(random_pairs(20, 9), 0.0f);
  const auto rows = compare_reports(r, r);
  REQUIRE(rows.size() == metric_names().size());
  for (const auto& c : rows) {
    CHECK(c.marker.empty());
    CHECK(c.direction == "=");
    CHECK(c.p_value > 0.9);
  }
}

TEST_CASE("comparison grid reports direction and markers") {
  const auto samples = random_pairs(30, 21);
  const auto good = report_for(samples, 0.0f);
  const auto bad = report_for(samples, 0.8f);
  const auto rows = compare_reports(good, bad);
  const auto& mae = *std::find_if(rows.begin(), rows.end(), [](const Comparison& c) { return c.metric == "mae"; });
  CHECK(mae.direction == "a<b");
  CHECK(mae.marker == "**");
  CHECK_FALSE(mae.exact);
  const std::string table = format_comparison_table("good", "bad", rows);
  CHECK(table.find("good < bad") != std::string::npos);
  CHECK(table.find("**") != std::string::npos);
  CHECK(table.find("p<0.0001") != std::string::npos);

  TempDir dir("cmp");
  write_comparison_csv(dir / "c.csv", "good", "bad", rows);
  const std::string csv = testing::read_file(dir / "c.csv");
  CHECK(csv.find("mae,good,bad,") != std::string::npos);
}

TEST_CASE("comparing different slice sets is an error") {
  const auto a = report_for(random_pairs(4, 1), 0.0f);
  auto b = a;
  b.slices.pop_back();
  CHECK_THROWS_AS(compare_reports(a, b), ValidationError);
  CHECK_THROWS_AS(compare_reports(MetricsReport{}, MetricsReport{}), ValidationError);
}

TEST_CASE("worker thread count from the environment") {
  ::unsetenv("JEXPAND_THREADS");
  CHECK(worker_threads() == 1);
  ::setenv("JEXPAND_THREADS", "3", 1);
  CHECK(worker_threads() == 3);
  ::setenv("JEXPAND_THREADS", "lots", 1);
  CHECK(worker_threads() == 1);
  ::unsetenv("JEXPAND_THREADS");
}
