#include "jexpand/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "jexpand/checkpoint.hpp"
#include "jexpand/config.hpp"
#include "jexpand/datagen.hpp"
#include "jexpand/error.hpp"
#include "jexpand/gradcheck.hpp"
#include "jexpand/report.hpp"
#include "jexpand/tensor_io.hpp"

namespace jexpand::cli {

namespace fs = std::filesystem;

namespace {

struct PhantomArgs {
  std::string out;
  std::int64_t count = 0;
  std::vector<std::int64_t> size{64, 64};
  std::string mix = "low:0.1,mid:0.5,high:0.9";
  std::uint64_t seed = 0;
  std::int64_t train_count = -1;
  std::string config;
};

struct PreprocessArgs {
  std::string manifest;
  std::vector<std::int64_t> size{64, 64};
  std::string out;
  std::string stats_split = "train";
};

struct TrainArgs {
  std::string config;
  std::string resume;
  std::string manifest;
  std::string out;
};

struct InferArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::string out;
};

struct EvaluateArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::string out = "report";
  std::string baseline;
};

struct CompareArgs {
  std::vector<std::string> reports;
  std::vector<std::string> names;
  std::string out;
};

struct GradcheckArgs {
  std::string ops = "all";
  std::uint64_t seed = 0;
  int trials = 5;
  double tolerance = 1e-3;
};

std::string options_hash(const nlohmann::json& j) { return fnv1a_hex(j.dump()); }

int cmd_phantom_gen(const PhantomArgs& a, std::ostream& out) {
  if (a.size.size() != 2) throw InvalidArgument("--size takes H W");
  PhantomGenOptions o;
  o.out_dir = a.out;
  o.count = a.count;
  o.severity_mix = a.mix;
  o.seed = a.seed;
  if (!a.config.empty()) {
    const auto cfg = load_config(a.config);
    o.base = cfg.phantom.spec;
    o.config_hash = config_hash(cfg);
  }
  o.base.height = a.size[0];
  o.base.width = a.size[1];
  if (a.train_count >= 0) o.train_count = a.train_count;
  if (o.config_hash.empty()) {
    o.config_hash = options_hash({{"count", o.count},
                                  {"size", a.size},
                                  {"severity_mix", o.severity_mix},
                                  {"seed", o.seed},
                                  {"train_count", a.train_count}});
  }
  const auto m = generate_phantom_dataset(o);
  out << "wrote " << m.entries.size() << " pairs (" << m.entries_in(Split::train).size() << " train, "
      << m.entries_in(Split::test).size() << " test) to " << (o.out_dir / "manifest.json").string() << '\n';
  return kOk;
}

int cmd_preprocess(const PreprocessArgs& a, std::ostream& out) {
  if (a.size.size() != 2) throw InvalidArgument("--target-size takes H W");
  const auto input = DatasetManifest::load(a.manifest);
  PreprocessOptions o;
  o.out_dir = a.out.empty() ? input.base_dir / "processed_set" : fs::path(a.out);
  o.target_h = a.size[0];
  o.target_w = a.size[1];
  o.stats_split = split_from_string(a.stats_split);
  o.config_hash = options_hash({{"input", input.config_hash}, {"target_size", a.size}});
  if (input.stage == DataStage::processed) o.config_hash = input.config_hash;
  const auto m = preprocess_dataset(input, o);
  out << "processed " << m.entries.size() << " pairs, clip mu=" << m.clip_stats->mu << " sigma=" << m.clip_stats->sigma
      << " (n_train=" << m.clip_stats->n_train << ") -> " << (o.out_dir / "manifest.json").string() << '\n';
  return kOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  ExperimentConfig cfg = load_config(a.config);
  if (!a.manifest.empty()) cfg.manifest = a.manifest;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (cfg.manifest.empty()) throw ConfigError("no manifest: set paths.manifest or pass --manifest");
  if (cfg.out_dir.empty()) throw ConfigError("no output directory: set paths.out_dir or pass --out");
  const std::string hash = config_hash(cfg);
  const auto manifest = DatasetManifest::load(cfg.manifest);
  if (manifest.stage != DataStage::processed) throw ValidationError("train needs a processed manifest");
  const auto samples = load_split(manifest, Split::train);

  train::TrainState state = a.resume.empty() ? train::TrainState(cfg.model_spec(), cfg.resolved_train())
                                             : ckpt::load_checkpoint(a.resume);
  if (!a.resume.empty() && ckpt::read_checkpoint_info(a.resume).config_hash != hash) {
    throw ValidationError("checkpoint " + a.resume + " was written under a different configuration");
  }
  out << "model " << nets::to_string(state.spec.kind) << ", config " << hash << ", " << samples.size()
      << " training pairs, epochs " << state.epoch << ".." << state.config.epochs << '\n';
  train::FitOptions options;
  options.out_dir = cfg.out_dir;
  options.config_hash = hash;
  const int total = state.config.epochs;
  options.on_epoch = [&out, total](const train::EpochLog& e) {
    out << "epoch " << (e.epoch + 1) << '/' << total << " k=" << e.k << std::setprecision(5) << " d_loss=" << e.d_loss
        << " g_adv=" << e.g_adv << " g_ch=" << e.g_ch << std::fixed << std::setprecision(1) << ' ' << e.seconds << "s"
        << std::defaultfloat << '\n'
        << std::flush;
  };
  const auto result = train::fit(state, samples, options);
  out << "final checkpoint " << result.final_checkpoint.string() << '\n';
  return kOk;
}

nets::Generator generator_for(const std::string& checkpoint, const DatasetManifest& manifest) {
  nets::Generator g = ckpt::load_generator(checkpoint);
  const auto s = g.config().slice_size;
  if (manifest.slice_h != s || manifest.slice_w != s) {
    throw ValidationError("checkpoint expects " + std::to_string(s) + "x" + std::to_string(s) + " slices, manifest has " +
                          std::to_string(manifest.slice_h) + "x" + std::to_string(manifest.slice_w));
  }
  return g;
}

DatasetManifest processed_manifest(const std::string& path) {
  auto m = DatasetManifest::load(path);
  if (m.stage != DataStage::processed) throw ValidationError("expected a processed manifest: " + path);
  return m;
}

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const auto manifest = processed_manifest(a.manifest);
  nets::Generator g = generator_for(a.checkpoint, manifest);
  const auto samples = load_split(manifest, split_from_string(a.split));
  const fs::path dir = a.out;
  fs::create_directories(dir);
  auto predict = eval::generator_predictor(g);
  nlohmann::json index;
  index["format"] = "jexpand.predictions";
  index["checkpoint"] = a.checkpoint;
  index["config_hash"] = ckpt::read_checkpoint_info(a.checkpoint).config_hash;
  index["split"] = a.split;
  index["entries"] = nlohmann::json::array();
  const std::int64_t h = manifest.slice_h, w = manifest.slice_w;
  for (const auto& s : samples) {
    const Tensor y = predict(s.x.reshape({1, 1, h, w}));
    const std::string file = s.id + "_pred.jxt";
    io::save_tensor(dir / file, y.reshape({h, w}));
    index["entries"].push_back({{"id", s.id}, {"path", file}});
  }
  std::ofstream idx(dir / "predictions.json", std::ios::trunc);
  if (!idx) throw IoError("cannot write " + (dir / "predictions.json").string());
  idx << index.dump(2) << '\n';
  out << "wrote " << samples.size() << " predictions to " << dir.string() << '\n';
  return kOk;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto manifest = processed_manifest(a.manifest);
  const auto samples = load_split(manifest, split_from_string(a.split));
  eval::MetricsReport report;
  std::optional<nets::Generator> g;
  eval::Predictor predict;
  if (!a.baseline.empty()) {
    if (a.baseline != "constant-mean") throw InvalidArgument("unknown baseline '" + a.baseline + "'");
    predict = eval::constant_predictor(eval::mean_target_value(load_split(manifest, Split::train)));
  } else {
    if (a.checkpoint.empty()) throw InvalidArgument("evaluate needs --checkpoint or --baseline");
    g.emplace(generator_for(a.checkpoint, manifest));
    predict = eval::generator_predictor(*g);
  }
  report = eval::evaluate(samples, *manifest.clip_stats, predict, eval::worker_threads());
  report.split = a.split;
  if (g) {
    const auto info = ckpt::read_checkpoint_info(a.checkpoint);
    report.model = nets::to_string(info.spec.kind);
    report.checkpoint = a.checkpoint;
    report.config_hash = info.config_hash;
  } else {
    report.model = "constant_mean";
    report.config_hash = manifest.config_hash;
  }
  const fs::path prefix = a.out;
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  write_report_json(prefix.string() + ".json", report);
  write_report_csv(prefix.string() + ".csv", report);
  out << "evaluated " << report.slices.size() << " slices -> " << prefix.string() << ".json/.csv\n";
  for (const auto& m : eval::metric_names()) {
    const auto s = eval::summarize(eval::metric_values(report, m));
    out << "  " << std::left << std::setw(9) << m << " median " << std::setprecision(5) << s.median << "  mean "
        << s.mean << '\n';
  }
  return kOk;
}

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  if (a.reports.size() != 2) throw InvalidArgument("compare takes exactly two --report arguments");
  const auto ra = eval::read_report_json(a.reports[0]), rb = eval::read_report_json(a.reports[1]);
  const std::string na = a.names.size() > 0 ? a.names[0] : (ra.model.empty() ? "A" : ra.model);
  std::string nb = a.names.size() > 1 ? a.names[1] : (rb.model.empty() ? "B" : rb.model);
  if (nb == na) nb += "'";
  const auto rows = eval::compare_reports(ra, rb);
  out << eval::format_comparison_table(na, nb, rows);
  if (!a.out.empty()) eval::write_comparison_csv(a.out, na, nb, rows);
  return kOk;
}

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  std::vector<std::string> ops;
  if (a.ops == "all") {
    ops = grad::gradcheck_ops();
  } else {
    std::stringstream ss(a.ops);
    std::string op;
    while (std::getline(ss, op, ',')) ops.push_back(op);
  }
  bool ok = true;
  for (const auto& op : ops) {
    const auto r = grad::run_gradcheck(op, a.seed, a.trials, a.tolerance);
    ok = ok && r.passed;
    out << std::left << std::setw(24) << r.op << " max_rel_err " << std::scientific << std::setprecision(3)
        << r.max_rel_error << std::defaultfloat << (r.passed ? "  ok" : "  FAIL") << '\n';
  }
  out << (ok ? "all ops passed" : "gradient check FAILED") << " (tolerance " << a.tolerance << ")\n";
  return ok ? kOk : kValidation;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Registration-free lung expansion toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "jexpand 1.0");

  PhantomArgs pa;
  auto* phantom = app.add_subcommand("phantom-gen", "Write synthetic phantom pairs and a raw manifest");
  phantom->add_option("--out", pa.out, "Output directory")->required();
  phantom->add_option("--count", pa.count, "Number of pairs")->required()->check(CLI::NonNegativeNumber);
  phantom->add_option("--size", pa.size, "Slice size H W")->expected(2);
  phantom->add_option("--severity-mix", pa.mix, "tag:severity[:weight],...");
  phantom->add_option("--seed", pa.seed, "Root seed");
  phantom->add_option("--train-count", pa.train_count, "Training pairs (default 70%)");
  phantom->add_option("--config", pa.config, "Take phantom settings from a config file");

  PreprocessArgs pp;
  auto* preprocess = app.add_subcommand("preprocess", "Clip, rescale and crop/pad a dataset");
  preprocess->add_option("--manifest", pp.manifest, "Raw manifest")->required();
  preprocess->add_option("--target-size", pp.size, "Target size H W")->expected(2);
  preprocess->add_option("--out", pp.out, "Output directory (default <manifest dir>/processed_set)");
  preprocess->add_option("--stats-split", pp.stats_split, "Split for clip statistics (must be train)");

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "Train a model from a config file");
  trainc->add_option("--config", ta.config, "Experiment config (JSON)")->required();
  trainc->add_option("--resume", ta.resume, "Checkpoint directory to resume from");
  trainc->add_option("--manifest", ta.manifest, "Override paths.manifest");
  trainc->add_option("--out", ta.out, "Override paths.out_dir");

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "Write predicted expansion maps");
  infer->add_option("--checkpoint", ia.checkpoint, "Checkpoint directory")->required();
  infer->add_option("--manifest", ia.manifest, "Processed manifest")->required();
  infer->add_option("--split", ia.split, "train or test");
  infer->add_option("--out", ia.out, "Output directory")->required();

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Compute the metrics report for a split");
  evaluate->add_option("--checkpoint", ea.checkpoint, "Checkpoint directory");
  evaluate->add_option("--manifest", ea.manifest, "Processed manifest")->required();
  evaluate->add_option("--split", ea.split, "train or test");
  evaluate->add_option("--out", ea.out, "Output prefix for .json and .csv");
  evaluate->add_option("--baseline", ea.baseline, "constant-mean: predict the mean training target");

  CompareArgs ca;
  auto* compare = app.add_subcommand("compare", "Mann-Whitney comparison of two reports");
  compare->add_option("--report", ca.reports, "Report JSON (twice)")->required();
  compare->add_option("--name", ca.names, "Column names");
  compare->add_option("--out", ca.out, "Write the grid as CSV");

  GradcheckArgs ga;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  gradcheck->add_option("--ops", ga.ops, "all or comma-separated op names");
  gradcheck->add_option("--seed", ga.seed, "Seed");
  gradcheck->add_option("--trials", ga.trials, "Random shapes per op")->check(CLI::PositiveNumber);
  gradcheck->add_option("--tolerance", ga.tolerance, "Maximum relative error");

  std::string preset = "desk";
  auto* config = app.add_subcommand("config", "Print a preset as a complete config file");
  config->add_option("--preset", preset, "desk or paper");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();  // program name
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << "jexpand 1.0\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (phantom->parsed()) return cmd_phantom_gen(pa, out);
    if (preprocess->parsed()) return cmd_preprocess(pp, out);
    if (trainc->parsed()) return cmd_train(ta, out);
    if (infer->parsed()) return cmd_infer(ia, out);
    if (evaluate->parsed()) return cmd_evaluate(ea, out);
    if (compare->parsed()) return cmd_compare(ca, out);
    if (gradcheck->parsed()) return cmd_gradcheck(ga, out);
    if (config->parsed()) {
      out << to_json_string(preset_config(preset)) << '\n';
      return kOk;
    }
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace jexpand::cli
