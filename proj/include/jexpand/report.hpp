#pragma once

// Per-slice evaluation, metrics reports (JSON + CSV) and report comparison.
//
// Conventions recorded in every report:
//   * PSNR and SSIM on the full slice in scaled units, peak 2.
//   * MAE, mean(J), SD(J) in J units (inverse of the train-clip rescale),
//     DSC_high and Spearman over lung pixels. A pixel is background when
//     both x and y hold the padding value -1.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jexpand/dataset.hpp"
#include "jexpand/metrics.hpp"
#include "jexpand/networks.hpp"

namespace jexpand::eval {

inline constexpr int kReportVersion = 1;
inline constexpr const char* kReportCsvHeader = "id,severity,psnr,ssim,dsc_high,rs,mae,mean_j,sd_j";

struct SliceRecord {
  std::string id;
  std::string severity_tag;
  metrics::Psnr psnr;
  double ssim = 0.0;
  double dsc_high = 0.0;
  std::optional<double> spearman_rs;  // missing when either map is constant
  double mae = 0.0;
  double mean_j = 0.0;  // prediction, J units
  double sd_j = 0.0;
  double target_mean_j = 0.0;
  double target_sd_j = 0.0;
};

struct Summary {
  std::int64_t n = 0;  // values that entered (finite, not missing)
  std::int64_t missing = 0;
  double mean = 0.0;
  double median = 0.0;
};

struct MetricsReport {
  std::string model;
  std::string checkpoint;
  std::string config_hash;
  std::string split = "test";
  std::vector<SliceRecord> slices;  // id order
};

/// Metric names in table order: psnr, ssim, dsc_high, rs, mae, mean_j, sd_j.
const std::vector<std::string>& metric_names();
/// Values of one metric across slices; missing values are skipped and an
/// infinite PSNR enters as +inf.
std::vector<double> metric_values(const MetricsReport& report, const std::string& metric,
                                  const std::string& severity_tag = "");
/// Mean/median over finite values.
Summary summarize(const std::vector<double>& values);

/// [N, 1, H, W] processed-unit predictions for a batch of inputs.
using Predictor = std::function<Tensor(const Tensor& x_batch)>;

/// Eval-mode generator, no graph recording, batches of `batch_size`.
Predictor generator_predictor(nets::Generator& generator, int batch_size = 16);
/// Every pixel predicted as `value`.
Predictor constant_predictor(float value);
/// Mean processed target value over the lung pixels of a split.
float mean_target_value(const std::vector<SamplePair>& samples);

SliceRecord evaluate_slice(const SamplePair& sample, const Tensor& prediction, const ClipStats& stats);

/// Predictions run serially in batches; metrics are computed on up to
/// `threads` workers and merged in id order, so the report does not depend
/// on the thread count.
MetricsReport evaluate(const std::vector<SamplePair>& samples, const ClipStats& stats, const Predictor& predict,
                       int threads = 1, int batch_size = 16);

/// JEXPAND_THREADS (default 1).
int worker_threads();

void write_report_json(const std::filesystem::path& path, const MetricsReport& report);
void write_report_csv(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_report_json(const std::filesystem::path& path);

struct Comparison {
  std::string metric;
  Summary a;
  Summary b;
  double u = 0.0;
  double p_value = 1.0;
  bool exact = false;
  std::string marker;     // "**" p<0.0001, "*" p<0.01
  std::string direction;  // "a>b", "a<b" or "=" by median; "n/a" when a side has no values
};

/// Mann-Whitney U per metric. Throws ValidationError when the reports do
/// not cover the same slice ids.
std::vector<Comparison> compare_reports(const MetricsReport& a, const MetricsReport& b);
std::string format_comparison_table(const std::string& name_a, const std::string& name_b,
                                    const std::vector<Comparison>& rows);
void write_comparison_csv(const std::filesystem::path& path, const std::string& name_a, const std::string& name_b,
                          const std::vector<Comparison>& rows);

}  // namespace jexpand::eval
