#include "jexpand/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "jexpand/error.hpp"
#include "jexpand/log.hpp"

namespace jexpand::eval {

using nlohmann::json;

namespace {

std::optional<double> metric_of(const SliceRecord& r, const std::string& metric) {
  if (metric == "psnr") return r.psnr.infinite ? std::numeric_limits<double>::infinity() : r.psnr.db;
  if (metric == "ssim") return r.ssim;
  if (metric == "dsc_high") return r.dsc_high;
  if (metric == "rs") return r.spearman_rs;
  if (metric == "mae") return r.mae;
  if (metric == "mean_j") return r.mean_j;
  if (metric == "sd_j") return r.sd_j;
  throw InvalidArgument("unknown metric '" + metric + "'");
}

json summary_json(const Summary& s) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"n", s.n}, {"missing", s.missing}, {"mean", num(s.mean)}, {"median", num(s.median)}};
}

json aggregate_json(const MetricsReport& report, const std::string& tag) {
  json out = json::object();
  for (const auto& m : metric_names()) {
    auto values = metric_values(report, m, tag);
    Summary s = summarize(values);
    std::int64_t total = 0;
    for (const auto& r : report.slices)
      if (tag.empty() || r.severity_tag == tag) ++total;
    s.missing = total - static_cast<std::int64_t>(values.size());
    out[m] = summary_json(s);
  }
  return out;
}

std::string fmt(double v, int precision = 6) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"psnr", "ssim", "dsc_high", "rs", "mae", "mean_j", "sd_j"};
  return names;
}

std::vector<double> metric_values(const MetricsReport& report, const std::string& metric,
                                  const std::string& severity_tag) {
  std::vector<double> out;
  for (const auto& r : report.slices) {
    if (!severity_tag.empty() && r.severity_tag != severity_tag) continue;
    if (const auto v = metric_of(r, metric)) out.push_back(*v);
  }
  return out;
}

Summary summarize(const std::vector<double>& values) {
  std::vector<double> finite;
  for (double v : values)
    if (std::isfinite(v)) finite.push_back(v);
  Summary s;
  s.n = static_cast<std::int64_t>(finite.size());
  s.missing = static_cast<std::int64_t>(values.size() - finite.size());
  if (finite.empty()) {
    s.mean = s.median = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double acc = 0.0;
  for (double v : finite) acc += v;
  s.mean = acc / static_cast<double>(finite.size());
  s.median = metrics::quantile_linear(finite, 0.5);
  return s;
}

Predictor generator_predictor(nets::Generator& generator, int batch_size) {
  if (batch_size < 1) throw InvalidArgument("predictor batch size must be >= 1");
  return [&generator, batch_size](const Tensor& x) {
    NoGradGuard no_grad;
    const std::int64_t n = x.dim(0), plane = x.numel() / std::max<std::int64_t>(n, 1);
    std::vector<float> out;
    out.reserve(static_cast<std::size_t>(x.numel()));
    for (std::int64_t start = 0; start < n; start += batch_size) {
      const std::int64_t m = std::min<std::int64_t>(batch_size, n - start);
      std::vector<float> chunk(x.data().begin() + start * plane, x.data().begin() + (start + m) * plane);
      Shape shape = x.shape();
      shape[0] = m;
      const Tensor y = generator.forward(Tensor::from_data(shape, std::move(chunk)), false);
      out.insert(out.end(), y.data().begin(), y.data().end());
    }
    Shape shape = x.shape();
    shape[1] = generator.config().out_channels;
    return Tensor::from_data(shape, std::move(out));
  };
}

Predictor constant_predictor(float value) {
  return [value](const Tensor& x) { return Tensor::full(x.shape(), value); };
}

float mean_target_value(const std::vector<SamplePair>& samples) {
  double acc = 0.0;
  std::int64_t n = 0;
  for (const auto& s : samples) {
    const auto xv = s.x.data(), yv = s.y.data();
    for (std::size_t i = 0; i < yv.size(); ++i) {
      if (xv[i] == kBackground && yv[i] == kBackground) continue;
      acc += yv[i];
      ++n;
    }
  }
  if (n == 0) throw ValidationError("mean_target_value: no lung pixels");
  return static_cast<float>(acc / static_cast<double>(n));
}

SliceRecord evaluate_slice(const SamplePair& sample, const Tensor& prediction, const ClipStats& stats) {
  if (prediction.numel() != sample.y.numel() || sample.x.numel() != sample.y.numel()) {
    throw ShapeError("evaluate: prediction for '" + sample.id + "' has " + std::to_string(prediction.numel()) +
                     " values, target has " + std::to_string(sample.y.numel()));
  }
  const double lo = stats.lower(), hi = stats.upper();
  const auto pv = prediction.data(), tv = sample.y.data(), xv = sample.x.data();
  std::vector<float> pred_j, target_j;
  for (std::size_t i = 0; i < tv.size(); ++i) {
    if (xv[i] == kBackground && tv[i] == kBackground) continue;
    pred_j.push_back(rescale_value_from_unit(pv[i], lo, hi));
    target_j.push_back(rescale_value_from_unit(tv[i], lo, hi));
  }
  if (pred_j.empty()) throw ValidationError("evaluate: slice '" + sample.id + "' has no lung pixels");

  SliceRecord r;
  r.id = sample.id;
  r.severity_tag = sample.severity_tag;
  r.psnr = metrics::psnr(pv, tv, 2.0);
  r.ssim = metrics::ssim(prediction.reshape(sample.y.shape()), sample.y);
  r.dsc_high = metrics::dsc_high(pred_j, target_j);
  r.spearman_rs = metrics::spearman(pred_j, target_j);
  r.mae = metrics::mae(pred_j, target_j);
  const auto ps = metrics::global_stats(pred_j), ts = metrics::global_stats(target_j);
  r.mean_j = ps.mean;
  r.sd_j = ps.sd;
  r.target_mean_j = ts.mean;
  r.target_sd_j = ts.sd;
  return r;
}

MetricsReport evaluate(const std::vector<SamplePair>& samples, const ClipStats& stats, const Predictor& predict,
                       int threads, int batch_size) {
  if (samples.empty()) throw ValidationError("evaluate: no slices");
  if (batch_size < 1) throw InvalidArgument("evaluate: batch size must be >= 1");
  const std::int64_t h = samples.front().x.dim(0), w = samples.front().x.dim(1), plane = h * w;

  std::vector<Tensor> predictions(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t m = std::min(samples.size() - start, static_cast<std::size_t>(batch_size));
    std::vector<float> xs;
    xs.reserve(m * static_cast<std::size_t>(plane));
    for (std::size_t i = start; i < start + m; ++i) {
      if (samples[i].x.dim(0) != h || samples[i].x.dim(1) != w) throw ShapeError("evaluate: slices differ in size");
      xs.insert(xs.end(), samples[i].x.data().begin(), samples[i].x.data().end());
    }
    const Tensor y = predict(Tensor::from_data({static_cast<std::int64_t>(m), 1, h, w}, std::move(xs)));
    if (y.numel() != static_cast<std::int64_t>(m) * plane) {
      throw ShapeError("evaluate: predictor returned " + shape_to_string(y.shape()) + " for " + std::to_string(m) +
                       " slices of " + std::to_string(h) + "x" + std::to_string(w));
    }
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<float> v(y.data().begin() + static_cast<std::ptrdiff_t>(i) * plane,
                           y.data().begin() + static_cast<std::ptrdiff_t>(i + 1) * plane);
      predictions[start + i] = Tensor::from_data({h, w}, std::move(v));
    }
  }

  std::vector<SliceRecord> records(samples.size());
  const int workers = std::clamp(threads, 1, static_cast<int>(samples.size()));
  auto run = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < samples.size(); i += stride) records[i] = evaluate_slice(samples[i], predictions[i], stats);
  };
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          run(static_cast<std::size_t>(t), static_cast<std::size_t>(workers));
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::sort(records.begin(), records.end(), [](const SliceRecord& a, const SliceRecord& b) { return a.id < b.id; });
  MetricsReport report;
  report.slices = std::move(records);
  return report;
}

int worker_threads() {
  const char* env = std::getenv("JEXPAND_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024) {
    log::warn(std::string("ignoring JEXPAND_THREADS='") + env + "', using 1 thread");
    return 1;
  }
  return static_cast<int>(v);
}

void write_report_json(const std::filesystem::path& path, const MetricsReport& report) {
  json j;
  j["format"] = "jexpand.report";
  j["version"] = kReportVersion;
  j["model"] = report.model;
  j["checkpoint"] = report.checkpoint;
  j["config_hash"] = report.config_hash;
  j["split"] = report.split;
  j["conventions"] = {{"psnr_peak", 2.0},
                      {"ssim", {{"window", 11}, {"sigma", 1.5}, {"k1", 0.01}, {"k2", 0.03}, {"dynamic_range", 2.0}}},
                      {"psnr_ssim_region", "full slice, scaled units"},
                      {"mae_global_region", "lung pixels, J units"},
                      {"background", "x == -1 and y == -1"},
                      {"dsc_quantile", 0.75},
                      {"severity", "synthetic phantom severity tag"}};
  j["slices"] = json::array();
  for (const auto& r : report.slices) {
    j["slices"].push_back({{"id", r.id},
                           {"severity_tag", r.severity_tag},
                           {"psnr_db", r.psnr.infinite ? json(nullptr) : json(r.psnr.db)},
                           {"psnr_infinite", r.psnr.infinite},
                           {"ssim", r.ssim},
                           {"dsc_high", r.dsc_high},
                           {"spearman_rs", r.spearman_rs ? json(*r.spearman_rs) : json(nullptr)},
                           {"mae", r.mae},
                           {"mean_j", r.mean_j},
                           {"sd_j", r.sd_j},
                           {"target_mean_j", r.target_mean_j},
                           {"target_sd_j", r.target_sd_j}});
  }
  std::set<std::string> tags;
  for (const auto& r : report.slices) tags.insert(r.severity_tag);
  j["aggregate"]["overall"] = aggregate_json(report, "");
  j["aggregate"]["by_severity"] = json::object();
  for (const auto& t : tags)
    if (!t.empty()) j["aggregate"]["by_severity"][t] = aggregate_json(report, t);
  j["comparisons"] = json::array();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write report " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write to report " + path.string());
}

void write_report_csv(const std::filesystem::path& path, const MetricsReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << kReportCsvHeader << '\n';
  out << std::setprecision(9);
  for (const auto& r : report.slices) {
    out << r.id << ',' << r.severity_tag << ',' << (r.psnr.infinite ? std::string("inf") : fmt(r.psnr.db, 9)) << ','
        << r.ssim << ',' << r.dsc_high << ',' << (r.spearman_rs ? fmt(*r.spearman_rs, 9) : std::string()) << ','
        << r.mae << ',' << r.mean_j << ',' << r.sd_j << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

MetricsReport read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report " + path.string());
  MetricsReport report;
  try {
    const json j = json::parse(in);
    if (j.value("format", std::string()) != "jexpand.report") throw ValidationError("not a metrics report");
    if (j.at("version").get<int>() != kReportVersion) throw ValidationError("unsupported report version");
    report.model = j.at("model").get<std::string>();
    report.checkpoint = j.at("checkpoint").get<std::string>();
    report.config_hash = j.at("config_hash").get<std::string>();
    report.split = j.at("split").get<std::string>();
    for (const auto& s : j.at("slices")) {
      SliceRecord r;
      r.id = s.at("id").get<std::string>();
      r.severity_tag = s.at("severity_tag").get<std::string>();
      r.psnr.infinite = s.at("psnr_infinite").get<bool>();
      r.psnr.db = r.psnr.infinite ? std::numeric_limits<double>::infinity() : s.at("psnr_db").get<double>();
      r.ssim = s.at("ssim").get<double>();
      r.dsc_high = s.at("dsc_high").get<double>();
      if (!s.at("spearman_rs").is_null()) r.spearman_rs = s.at("spearman_rs").get<double>();
      r.mae = s.at("mae").get<double>();
      r.mean_j = s.at("mean_j").get<double>();
      r.sd_j = s.at("sd_j").get<double>();
      r.target_mean_j = s.at("target_mean_j").get<double>();
      r.target_sd_j = s.at("target_sd_j").get<double>();
      report.slices.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ValidationError("report " + path.string() + ": " + e.what());
  }
  return report;
}

std::vector<Comparison> compare_reports(const MetricsReport& a, const MetricsReport& b) {
  std::set<std::string> ids_a, ids_b;
  for (const auto& r : a.slices) ids_a.insert(r.id);
  for (const auto& r : b.slices) ids_b.insert(r.id);
  if (ids_a != ids_b) {
    std::vector<std::string> only;
    std::set_symmetric_difference(ids_a.begin(), ids_a.end(), ids_b.begin(), ids_b.end(), std::back_inserter(only));
    throw ValidationError("compare: reports cover different slices (" + std::to_string(only.size()) +
                          " ids differ, first '" + only.front() + "')");
  }
  if (ids_a.empty()) throw ValidationError("compare: reports are empty");
  std::vector<Comparison> rows;
  for (const auto& m : metric_names()) {
    const auto va = metric_values(a, m), vb = metric_values(b, m);
    Comparison c;
    c.metric = m;
    c.a = summarize(va);
    c.b = summarize(vb);
    if (va.empty() || vb.empty()) {
      c.u = c.p_value = std::numeric_limits<double>::quiet_NaN();
      c.direction = "n/a";
      rows.push_back(c);
      continue;
    }
    const auto u = metrics::mann_whitney_u(va, vb);
    c.u = u.u;
    c.p_value = u.p_value;
    c.exact = u.exact;
    c.marker = metrics::significance_marker(c.p_value);
    const double ma = metrics::quantile_linear(va, 0.5), mb = metrics::quantile_linear(vb, 0.5);
    c.direction = ma > mb ? "a>b" : (ma < mb ? "a<b" : "=");
    rows.push_back(c);
  }
  return rows;
}

std::string format_comparison_table(const std::string& name_a, const std::string& name_b,
                                    const std::vector<Comparison>& rows) {
  std::ostringstream os;
  auto cell = [](const Summary& s) { return fmt(s.median, 4) + " (" + fmt(s.mean, 4) + ")"; };
  os << std::left << std::setw(10) << "metric" << std::setw(22) << name_a << std::setw(22) << name_b
     << std::setw(12) << "U" << std::setw(12) << "p" << std::setw(5) << "sig" << "direction\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(10) << r.metric << std::setw(22) << cell(r.a) << std::setw(22) << cell(r.b)
       << std::setw(12) << fmt(r.u, 6) << std::setw(12) << fmt(r.p_value, 4) << std::setw(5) << r.marker
       << (r.direction == "a>b" ? name_a + " > " + name_b : r.direction == "a<b" ? name_a + " < " + name_b : r.direction)
       << '\n';
  }
  os << "cells: median (mean); * p<0.01, ** p<0.0001 (two-sided Mann-Whitney U)\n";
  return os.str();
}

void write_comparison_csv(const std::filesystem::path& path, const std::string& name_a, const std::string& name_b,
                          const std::vector<Comparison>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "metric,model_a,model_b,median_a,median_b,mean_a,mean_b,u,p_value,exact,marker,direction\n";
  out << std::setprecision(9);
  for (const auto& r : rows) {
    out << r.metric << ',' << name_a << ',' << name_b << ',' << fmt(r.a.median, 9) << ',' << fmt(r.b.median, 9) << ','
        << fmt(r.a.mean, 9) << ',' << fmt(r.b.mean, 9) << ',' << fmt(r.u, 9) << ',' << fmt(r.p_value, 9) << ','
        << (r.exact ? 1 : 0) << ',' << r.marker << ',' << r.direction << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace jexpand::eval
