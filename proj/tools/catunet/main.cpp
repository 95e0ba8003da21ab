#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "catunet/data_io.hpp"
#include "catunet/diagnosis.hpp"
#include "catunet/errors.hpp"
#include "catunet/gradcheck.hpp"
#include "catunet/log.hpp"
#include "catunet/metrics.hpp"
#include "catunet/model.hpp"
#include "catunet/synth.hpp"
#include "catunet/training.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace catunet;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Bad flags or config values, reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Command-line overrides. Only flags that were actually given are applied.
struct Overrides {
  std::optional<fs::path> config_file;
  std::optional<int> size, channels, depth, base, growth, kernel;
  std::optional<double> dropout;
  std::optional<int> epochs, batch, patience, max_train;
  std::optional<double> lr, decay, reg_weight, feature_bound, val_fraction;
  std::optional<std::string> schedule;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold, pixel_threshold;
  std::optional<int> jobs;
};

template <typename T, typename U>
void set_if(const std::optional<T>& flag, U& target) {
  if (flag) target = *flag;
}

cli::RunConfig resolve(const Overrides& o) {
  try {
    cli::RunConfig config = o.config_file ? cli::load_run_config(*o.config_file) : cli::RunConfig{};
    set_if(o.size, config.model.input_size);
    set_if(o.channels, config.model.input_channels);
    set_if(o.depth, config.model.depth);
    set_if(o.base, config.model.base_channels);
    set_if(o.growth, config.model.channel_growth);
    set_if(o.kernel, config.model.kernel_size);
    set_if(o.dropout, config.model.dropout_rate);
    set_if(o.epochs, config.training.epochs);
    set_if(o.batch, config.training.batch_size);
    set_if(o.patience, config.training.patience);
    set_if(o.max_train, config.training.max_train_samples);
    set_if(o.lr, config.training.learning_rate);
    set_if(o.decay, config.training.decay_rate);
    set_if(o.reg_weight, config.training.reg_weight);
    set_if(o.feature_bound, config.training.feature_bound);
    set_if(o.val_fraction, config.training.validation_fraction);
    set_if(o.seed, config.training.seed);
    set_if(o.threshold, config.thresholds.sample_threshold);
    set_if(o.pixel_threshold, config.thresholds.pixel_threshold);
    set_if(o.jobs, config.jobs);
    if (o.schedule) config.training.schedule_mode = parse_schedule_mode(*o.schedule);
    config.validate();
    return config;
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

void add_config_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config_file, "JSON config file; flags take precedence over it")
      ->check(CLI::ExistingFile);
  cmd.add_option("--seed", o.seed, "Master seed");
  cmd.add_option("--jobs", o.jobs, "Worker threads for per-sample scoring");
}

void add_model_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--size", o.size, "Input side length S (default 256)");
  cmd.add_option("--channels", o.channels, "Input channels (default 1)");
  cmd.add_option("--depth", o.depth, "Encoder levels (default 3)");
  cmd.add_option("--base", o.base, "Channels of the first encoder level (default 16)");
  cmd.add_option("--growth", o.growth, "Channel multiplier per level (default 2)");
  cmd.add_option("--kernel", o.kernel, "Odd convolution kernel size (default 3)");
  cmd.add_option("--dropout", o.dropout, "Decoder dropout rate (default 0.5)");
}

void add_training_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--epochs", o.epochs, "Training epochs (default 50)");
  cmd.add_option("--batch", o.batch, "Batch size (default 8)");
  cmd.add_option("--lr", o.lr, "Initial learning rate (default 0.01)");
  cmd.add_option("--decay", o.decay, "Learning rate decay factor (default 0.1)");
  cmd.add_option("--patience", o.patience, "Epochs without improvement before decay (default 10)");
  cmd.add_option("--reg-weight", o.reg_weight, "L2 penalty weight (default 0)");
  cmd.add_option("--feature-bound", o.feature_bound, "Warn when a concat feature norm exceeds this");
  cmd.add_option("--schedule", o.schedule, "plateau or literal_exponential (default plateau)");
  cmd.add_option("--val-fraction", o.val_fraction, "Held-out validation fraction (default 0.2)");
  cmd.add_option("--max-train", o.max_train, "Warn above this many training samples (default 100)");
}

void add_threshold_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--threshold", o.threshold, "Sample threshold T on the 0-255 MSE scale (default 50)");
  cmd.add_option("--pixel-threshold", o.pixel_threshold, "Per-pixel error threshold (default Otsu)");
}

std::string format_rate(const std::optional<double>& value) {
  return value ? fmt::format("{:.4f}", *value) : "n/a";
}

std::vector<ImageSample> preprocess_all(const std::vector<ImageSample>& samples, const CatUNetConfig& config) {
  std::vector<ImageSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(preprocess(s, config.input_size, config.input_channels));
  return out;
}

std::vector<double> scores_of(const CatUNetModel& model, std::span<const ImageSample> samples,
                              const ThresholdConfig& thresholds, int jobs) {
  std::vector<double> out;
  for (const auto& r : diagnose_batch(model, samples, thresholds, {.with_masks = false, .jobs = jobs})) {
    if (r.error) throw Error(fmt::format("calibration sample '{}': {}", r.id, *r.error));
    out.push_back(r.score);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  SynthConfig config;
  fs::path out;
};

int run_synth(const SynthArgs& args) {
  try {
    args.config.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  synthesize(args.config, args.out);
  fmt::print("wrote {} positive and {} negative images to {}\n", args.config.n_positive, args.config.n_negative,
             args.out.string());
  return 0;
}

struct TrainArgs {
  Overrides overrides;
  fs::path data;
  fs::path out = "model.catu";
  std::optional<fs::path> run_dir;
};

int run_train(const TrainArgs& args) {
  cli::RunConfig config = resolve(args.overrides);
  const fs::path run_dir = args.run_dir.value_or(args.out.has_parent_path() ? args.out.parent_path() : fs::path("."));
  fs::create_directories(run_dir);
  config.training.best_checkpoint = run_dir / "best.catu";
  cli::write_run_config(config, run_dir / "resolved_config.json");

  const Dataset dataset = load_dataset(args.data);
  if (dataset.positives.empty()) throw Error(fmt::format("{}: no positive images to train on", args.data.string()));
  if (!dataset.negatives.empty()) {
    log::info(fmt::format("ignoring {} negative images; training uses positives only", dataset.negatives.size()));
  }
  const auto samples = preprocess_all(dataset.positives, config.model);

  Rng init(config.training.seed, Stream::init);
  CatUNetModel model = CatUNetModel::build(config.model, init);
  fmt::print("training on {} positives, {} parameters, {} epochs\n", samples.size(), model.parameter_count(),
             config.training.epochs);
  const TrainReport report = train(model, samples, config.training);

  save_checkpoint(model, args.out);
  std::ofstream(run_dir / "train_report.csv") << report.to_csv();
  if (!report.epochs.empty()) {
    const auto& last = report.epochs.back();
    fmt::print("final epoch {}: train loss {:.6g}, val loss {:.6g}, lr {:.3g}\n", last.epoch, last.train_loss,
               last.val_loss, last.lr);
  }
  if (report.best_epoch) {
    fmt::print("restored best epoch {} (val loss {:.6g})\n", *report.best_epoch,
               report.epochs[static_cast<std::size_t>(*report.best_epoch - 1)].val_loss);
  }
  fmt::print("checkpoint: {}\nrun dir: {}\n", args.out.string(), run_dir.string());
  return 0;
}

struct EvaluateArgs {
  Overrides overrides;
  fs::path model;
  fs::path data;
  fs::path out = "evaluation";
  std::optional<fs::path> report;
  std::optional<fs::path> calibrate;
  bool write_masks = false;
};

int run_evaluate(const EvaluateArgs& args) {
  cli::RunConfig config = resolve(args.overrides);
  const CatUNetModel model = load_checkpoint(args.model);
  config.model = model.config();

  // A directory with a positive/ subfolder is a labelled dataset; otherwise
  // every image directly inside it is scored without labels.
  std::vector<ImageSample> raw;
  if (fs::is_directory(args.data / "positive")) {
    Dataset dataset = load_dataset(args.data);
    raw = std::move(dataset.positives);
    raw.insert(raw.end(), std::make_move_iterator(dataset.negatives.begin()),
               std::make_move_iterator(dataset.negatives.end()));
  } else {
    raw = load_images(args.data);
  }
  const auto samples = preprocess_all(raw, config.model);

  if (args.calibrate) {
    const Dataset held_out = load_dataset(*args.calibrate);
    const auto pos = preprocess_all(held_out.positives, config.model);
    const auto neg = preprocess_all(held_out.negatives, config.model);
    const Calibration c = calibrate_threshold(scores_of(model, pos, config.thresholds, config.jobs),
                                              scores_of(model, neg, config.thresholds, config.jobs));
    config.thresholds.sample_threshold = c.threshold;
    fmt::print("calibrated threshold {:.4g} (balanced accuracy {:.4f} on {} + {} samples)\n", c.threshold,
               c.balanced_accuracy, pos.size(), neg.size());
  }

  const bool any_truth_mask =
      std::any_of(samples.begin(), samples.end(), [](const ImageSample& s) { return s.truth_mask.has_value(); });
  const auto results = diagnose_batch(model, samples, config.thresholds,
                                      {.with_masks = args.write_masks || any_truth_mask, .jobs = config.jobs});

  fs::create_directories(args.out);
  cli::write_run_config(config, args.out / "resolved_config.json");

  MetricsReport metrics;
  metrics.threshold = config.thresholds.sample_threshold;
  metrics.samples = samples.size();
  std::vector<Tensor> originals, reconstructions;
  std::vector<Label> predicted, truth;
  std::vector<double> dice_values;
  std::ofstream lines(args.out / "diagnosis.jsonl");
  for (std::size_t i = 0; i < results.size(); ++i) {
    const DiagnosisResult& r = results[i];
    const ImageSample& s = samples[i];
    std::optional<std::string> mask_path;
    if (r.error) {
      ++metrics.failed_samples;
      log::warn(fmt::format("sample '{}' failed: {}", r.id, *r.error));
    } else {
      const Tensor batch = s.pixels.reshaped(Shape{1, s.pixels.dim(0), s.pixels.dim(1), s.pixels.dim(2)});
      originals.push_back(batch);
      reconstructions.push_back(model.infer(batch));
      if (s.truth_label) {
        predicted.push_back(r.label);
        truth.push_back(*s.truth_label);
      }
      if (r.mask && s.truth_mask) dice_values.push_back(dice(r.mask->mask, *s.truth_mask));
      if (r.mask && args.write_masks) {
        const fs::path p = args.out / "masks" / (r.id + ".pgm");
        fs::create_directories(p.parent_path());
        write_mask(p, r.mask->mask);
        mask_path = p.string();
      }
    }
    nlohmann::json j = r.to_json(mask_path);
    if (s.truth_label) j["truth"] = label_name(*s.truth_label);
    lines << j.dump() << '\n';
  }

  if (!originals.empty()) metrics.reconstruction_accuracy = reconstruction_accuracy(originals, reconstructions).value;
  if (!truth.empty()) metrics.confusion = confusion(predicted, truth);
  if (!dice_values.empty()) {
    double total = 0.0;
    for (double d : dice_values) total += d;
    metrics.dice = total / static_cast<double>(dice_values.size());
  }

  const fs::path report_path = args.report.value_or(args.out / "metrics.json");
  if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
  std::ofstream(report_path) << metrics.to_json().dump(2) << '\n';
  if (metrics.confusion) std::ofstream(args.out / "confusion.csv") << metrics.confusion_csv();

  fmt::print("samples              {} ({} failed)\n", metrics.samples, metrics.failed_samples);
  fmt::print("threshold            {:.4g}\n", config.thresholds.sample_threshold);
  fmt::print("reconstruction acc.  {}\n", format_rate(metrics.reconstruction_accuracy));
  if (metrics.confusion) {
    const ConfusionMatrix& c = *metrics.confusion;
    fmt::print("accuracy             {}\n", format_rate(c.accuracy()));
    fmt::print("sensitivity          {}\n", format_rate(c.sensitivity()));
    fmt::print("specificity          {}\n", format_rate(c.specificity()));
    fmt::print("confusion            TP {}  FN {}  FP {}  TN {}\n", c.tp, c.fn, c.fp, c.tn);
  } else {
    fmt::print("classification       n/a (no labels)\n");
  }
  fmt::print("mean Dice            {}\n", format_rate(metrics.dice));
  fmt::print("report: {}\n", report_path.string());
  return metrics.failed_samples == 0 ? 0 : kExitFailure;
}

struct DiagnoseArgs {
  Overrides overrides;
  fs::path model;
  fs::path image;
  std::optional<fs::path> mask_out;
};

int run_diagnose(const DiagnoseArgs& args) {
  const cli::RunConfig config = resolve(args.overrides);
  const CatUNetModel model = load_checkpoint(args.model);
  const ImageSample sample = preprocess(load_image(args.image), model.config().input_size, model.config().input_channels);
  const std::vector<ImageSample> one{sample};
  const DiagnosisResult r =
      diagnose_batch(model, one, config.thresholds, {.with_masks = args.mask_out.has_value(), .jobs = 1}).front();
  std::optional<std::string> mask_path;
  if (!r.error && args.mask_out) {
    write_mask(*args.mask_out, r.mask->mask);
    mask_path = args.mask_out->string();
  }
  fmt::print("{}\n", r.to_json(mask_path).dump());
  return r.error ? kExitFailure : 0;
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::optional<std::string> fault;
};

int run_gradcheck(const GradcheckArgs& args) {
  const auto cases = run_gradcheck_suite({.seed = args.seed, .fault = args.fault});
  bool ok = true;
  for (const auto& c : cases) {
    fmt::print("{:<4} {:<24} {:.3e} (tolerance {:.0e})\n", c.passed() ? "ok" : "FAIL", c.name, c.max_relative_error,
               c.tolerance);
    ok = ok && c.passed();
  }
  if (!ok) {
    for (const auto& c : cases) {
      if (!c.passed()) fmt::print(stderr, "gradient check failed: {}\n", c.name);
    }
  }
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  log::init_from_env();

  CLI::App app{"Reconstruction-based lesion screening with a concatenation U-Net"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic dataset");
  synth->add_option("--out", synth_args.out, "Output dataset root")->required();
  synth->add_option("--n-pos", synth_args.config.n_positive, "Positive images")->capture_default_str();
  synth->add_option("--n-neg", synth_args.config.n_negative, "Negative images")->capture_default_str();
  synth->add_option("--size", synth_args.config.image_size, "Image side length")->capture_default_str();
  synth->add_option("--seed", synth_args.config.seed, "Seed")->capture_default_str();
  synth->add_option("--noise", synth_args.config.noise_std, "Noise standard deviation")->capture_default_str();
  synth->add_option("--amplitude", synth_args.config.lesion_amplitude, "Lesion brightness")->capture_default_str();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train the autoencoder on the positive images of a dataset");
  train_cmd->add_option("--data", train_args.data, "Dataset root with positive/")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", train_args.out, "Checkpoint path")->capture_default_str();
  train_cmd->add_option("--run-dir", train_args.run_dir, "Directory for the report, config and best checkpoint");
  add_config_flags(*train_cmd, train_args.overrides);
  add_model_flags(*train_cmd, train_args.overrides);
  add_training_flags(*train_cmd, train_args.overrides);

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Score a dataset and compute metrics");
  evaluate->add_option("--model", eval_args.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--data", eval_args.data, "Dataset root or flat image directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--out", eval_args.out, "Output directory")->capture_default_str();
  evaluate->add_option("--report", eval_args.report, "Metrics JSON path (default <out>/metrics.json)");
  evaluate->add_option("--calibrate", eval_args.calibrate, "Labelled dataset used to pick the threshold")
      ->check(CLI::ExistingDirectory);
  evaluate->add_flag("--masks", eval_args.write_masks, "Write error masks under <out>/masks");
  add_config_flags(*evaluate, eval_args.overrides);
  add_threshold_flags(*evaluate, eval_args.overrides);

  DiagnoseArgs diag_args;
  auto* diagnose = app.add_subcommand("diagnose", "Classify a single image");
  diagnose->add_option("--model", diag_args.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  diagnose->add_option("--image", diag_args.image, "Image file")->required()->check(CLI::ExistingFile);
  diagnose->add_option("--mask-out", diag_args.mask_out, "Write the error mask as PGM");
  add_config_flags(*diagnose, diag_args.overrides);
  add_threshold_flags(*diagnose, diag_args.overrides);

  GradcheckArgs grad_args;
  auto* gradcheck = app.add_subcommand("gradcheck", "Run the gradient check suite");
  gradcheck->add_option("--seed", grad_args.seed, "Seed")->capture_default_str();
  gradcheck->add_option("--inject-fault", grad_args.fault, "Corrupt the named case")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return run_synth(synth_args);
    if (*train_cmd) return run_train(train_args);
    if (*evaluate) return run_evaluate(eval_args);
    if (*diagnose) return run_diagnose(diag_args);
    if (*gradcheck) return run_gradcheck(grad_args);
  } catch (const UsageError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const TrainingAborted& e) {
    fmt::print(stderr, "training aborted: {}\n", e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
