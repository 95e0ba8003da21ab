// Acceptance gate: one PASS/FAIL line per criterion.
//
//   catunet_acceptance [--only 1,3,...] [--out DIR]

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include "../support/oracles.hpp"
#include "catunet/diagnosis.hpp"
#include "catunet/gradcheck.hpp"
#include "catunet/kernels.hpp"
#include "catunet/log.hpp"
#include "catunet/metrics.hpp"
#include "catunet/synth.hpp"
#include "catunet/training.hpp"

using namespace catunet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// End-to-end pipeline shared by criteria 4, 5, 7 and 8.

constexpr int kEndToEndSize = 32;
constexpr int kTrainPositives = 100;
constexpr int kTestPerClass = 25;
constexpr int kCalibrationNegatives = 20;

struct EndToEnd {
  CatUNetModel model;
  std::string report_csv;
  std::string metrics_json;
  MetricsReport metrics;
  double seconds = 0.0;
};

EndToEnd run_end_to_end(std::uint64_t seed) {
  const auto start = Clock::now();
  SynthConfig sc;
  sc.image_size = kEndToEndSize;
  sc.seed = seed;

  // Disjoint index ranges keep training, calibration and test images apart.
  std::vector<ImageSample> train_set, calibration_negatives, test_set;
  for (int i = 0; i < kTrainPositives; ++i) train_set.push_back(synthesize_sample(sc, Label::positive, i).sample);
  for (int i = 0; i < kTestPerClass; ++i) {
    test_set.push_back(synthesize_sample(sc, Label::positive, kTrainPositives + i).sample);
  }
  for (int i = 0; i < kTestPerClass; ++i) test_set.push_back(synthesize_sample(sc, Label::negative, i).sample);
  for (int i = 0; i < kCalibrationNegatives; ++i) {
    calibration_negatives.push_back(synthesize_sample(sc, Label::negative, kTestPerClass + i).sample);
  }

  CatUNetConfig mc;
  mc.input_size = kEndToEndSize;
  mc.depth = 2;
  Rng init(seed, Stream::init);
  EndToEnd out{CatUNetModel::build(mc, init), {}, {}, {}, 0.0};

  TrainingConfig tc;
  tc.seed = seed;
  const TrainReport report = train(out.model, train_set, tc);
  out.report_csv = report.to_csv();

  std::vector<double> positive_scores, negative_scores;
  for (std::size_t i : report.validation_indices) positive_scores.push_back(score(out.model, train_set[i].pixels));
  for (const auto& s : calibration_negatives) negative_scores.push_back(score(out.model, s.pixels));
  ThresholdConfig thresholds;
  thresholds.sample_threshold = calibrate_threshold(positive_scores, negative_scores).threshold;

  const auto results = diagnose_batch(out.model, test_set, thresholds, {.with_masks = true});
  std::vector<Label> predicted, truth;
  std::vector<Tensor> originals, reconstructions;
  double dice_total = 0.0;
  int dice_count = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    predicted.push_back(results[i].label);
    truth.push_back(*test_set[i].truth_label);
    const Tensor& pixels = test_set[i].pixels;
    const Tensor batch = pixels.reshaped(Shape{1, pixels.dim(0), pixels.dim(1), pixels.dim(2)});
    originals.push_back(batch);
    reconstructions.push_back(out.model.infer(batch));
    if (test_set[i].truth_mask) {
      dice_total += dice(results[i].mask->mask, *test_set[i].truth_mask);
      ++dice_count;
    }
  }
  out.metrics.samples = results.size();
  out.metrics.threshold = thresholds.sample_threshold;
  out.metrics.confusion = confusion(predicted, truth);
  out.metrics.dice = dice_total / dice_count;
  out.metrics.reconstruction_accuracy = reconstruction_accuracy(originals, reconstructions).value;
  out.metrics_json = out.metrics.to_json().dump(2);
  out.seconds = seconds_since(start);
  return out;
}

// ---------------------------------------------------------------------------

Outcome criterion_gradcheck() {
  const auto start = Clock::now();
  const auto cases = run_gradcheck_suite({});
  std::string failures;
  double worst_primitive = 0.0, model_error = 0.0;
  for (const auto& c : cases) {
    if (!c.passed()) failures += fmt::format(" {}={:.3g}", c.name, c.max_relative_error);
    if (c.name == "model") model_error = c.max_relative_error;
    else worst_primitive = std::max(worst_primitive, c.max_relative_error);
  }
  bool control_caught = false;
  for (const auto& c : run_gradcheck_suite({.seed = 0, .fault = "conv2d"})) {
    if (c.name == "conv2d") control_caught = !c.passed();
  }
  const double elapsed = seconds_since(start);
  const bool pass = failures.empty() && control_caught && elapsed < 120.0;
  return {pass, fmt::format("{} cases, worst primitive {:.2e}, model {:.2e}, fault control {}, {:.1f}s{}",
                            cases.size(), worst_primitive, model_error, control_caught ? "caught" : "MISSED", elapsed,
                            failures.empty() ? "" : "; failing:" + failures)};
}

Outcome criterion_kernel_oracles() {
  Rng rng(2, Stream::gradcheck);
  double conv_worst = 0.0, pool_worst = 0.0, up_worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cin = 1 + rng.below(4), cout = 1 + rng.below(4), k = 1 + rng.below(3);
    const int stride = 1 + static_cast<int>(rng.below(2)), pad = static_cast<int>(rng.below(2));
    const Tensor x = oracle::random_tensor({1 + rng.below(2), cin, k + rng.below(8), k + rng.below(8)}, rng);
    const Tensor w = oracle::random_tensor({cout, cin, k, k}, rng);
    const Tensor b = oracle::random_tensor({cout}, rng);
    conv_worst = std::max(conv_worst, oracle::max_abs_diff(kernels::conv2d_forward(x, w, b, {stride, pad}),
                                                           oracle::conv2d(x, w, b, stride, pad)));
  }
  for (int trial = 0; trial < 50; ++trial) {
    const int size = 1 + static_cast<int>(rng.below(3)), stride = 1 + static_cast<int>(rng.below(3));
    const Tensor x = oracle::random_tensor({1 + rng.below(2), 1 + rng.below(4), size + rng.below(8), size + rng.below(8)}, rng);
    pool_worst = std::max(pool_worst, oracle::max_abs_diff(kernels::maxpool2d_forward(x, {size, stride}).output,
                                                           oracle::maxpool2d(x, size, stride)));
  }
  for (int trial = 0; trial < 50; ++trial) {
    const int factor = 1 + static_cast<int>(rng.below(3));
    const Tensor x = oracle::random_tensor({1 + rng.below(2), 1 + rng.below(4), 1 + rng.below(8), 1 + rng.below(8)}, rng);
    up_worst = std::max(up_worst, oracle::max_abs_diff(kernels::upsample_nearest_forward(x, factor),
                                                       oracle::upsample_nearest(x, factor)));
  }
  const bool pass = conv_worst <= 1e-6 && pool_worst <= 1e-6 && up_worst <= 1e-6;
  return {pass, fmt::format("max abs diff over 50 cases each: conv2d {:.2e}, maxpool {:.2e}, upsample {:.2e}",
                            conv_worst, pool_worst, up_worst)};
}

Outcome criterion_overfit() {
  const auto start = Clock::now();
  SynthConfig sc;
  sc.image_size = 64;
  std::vector<ImageSample> samples;
  for (int i = 0; i < 16; ++i) samples.push_back(synthesize_sample(sc, Label::positive, i).sample);

  CatUNetConfig mc;
  mc.input_size = 64;
  mc.depth = 2;
  mc.base_channels = 8;
  Rng init(0, Stream::init);
  auto model = CatUNetModel::build(mc, init);
  TrainingConfig tc;
  tc.epochs = 200;
  tc.learning_rate = 0.01;
  tc.validation_fraction = 0.0;
  const auto report = train(model, samples, tc);

  std::vector<Tensor> originals, reconstructions;
  for (const auto& s : samples) {
    const Tensor batch = s.pixels.reshaped(Shape{1, 1, 64, 64});
    originals.push_back(batch);
    reconstructions.push_back(model.infer(batch));
  }
  const auto accuracy = reconstruction_accuracy(originals, reconstructions);
  double leading = 0.0, trailing = 0.0;
  for (int i = 0; i < 10; ++i) {
    leading += report.epochs[i].train_loss;
    trailing += report.epochs[report.epochs.size() - 1 - i].train_loss;
  }
  const double elapsed = seconds_since(start);
  const bool pass = accuracy.value >= 0.98 && trailing < leading && elapsed < 600.0;
  return {pass, fmt::format("reconstruction accuracy {:.5f} (mse {:.5f}), trailing/leading loss {:.4f}/{:.4f}, {:.1f}s",
                            accuracy.value, 1.0 - accuracy.raw, trailing / 10, leading / 10, elapsed)};
}

Outcome criterion_diagnosis(const EndToEnd& run) {
  const auto& m = *run.metrics.confusion;
  const double accuracy = m.accuracy().value_or(0.0), sensitivity = m.sensitivity().value_or(0.0);
  const bool pass = accuracy >= 0.90 && sensitivity >= 0.90 && run.seconds < 1200.0;
  return {pass, fmt::format("accuracy {:.3f}, sensitivity {:.3f}, specificity {:.3f} (tp {} fn {} tn {} fp {}), "
                            "threshold {:.1f}, {:.1f}s",
                            accuracy, sensitivity, m.specificity().value_or(0.0), m.tp, m.fn, m.tn, m.fp,
                            *run.metrics.threshold, run.seconds)};
}

Outcome criterion_dice(const EndToEnd& run) {
  auto mask = [](std::initializer_list<float> v) { return Tensor(Shape{v.size()}, std::vector<float>(v)); };
  const bool fixtures = dice(mask({1, 1, 0, 0}), mask({1, 1, 0, 0})) == 1.0 &&
                        dice(mask({1, 1, 0, 0}), mask({0, 0, 1, 1})) == 0.0 &&
                        dice(mask({1, 1, 1, 1, 0, 0}), mask({0, 0, 1, 1, 1, 1})) == 0.5;
  const double mean = *run.metrics.dice;
  return {fixtures && mean >= 0.70,
          fmt::format("mean Dice {:.3f} over {} test positives; fixtures 1.0/0.0/0.5 {}", mean, kTestPerClass,
                      fixtures ? "exact" : "WRONG")};
}

Outcome criterion_scheduler() {
  TrainingConfig tc;
  tc.learning_rate = 0.01;
  tc.decay_rate = 0.1;
  tc.patience = 10;
  auto state = SchedulerState::initial(tc);
  state = schedule_update(state, 1.0, tc);
  std::vector<double> sequence{state.current_lr};
  for (int epoch = 0; epoch < 20; ++epoch) {
    state = schedule_update(state, 1.0, tc);
    if (state.current_lr != sequence.back()) sequence.push_back(state.current_lr);
  }
  const bool pass = sequence == std::vector<double>{0.01, 0.001, 1e-4};
  std::string text;
  for (double lr : sequence) text += fmt::format("{}{}", text.empty() ? "" : " -> ", lr);
  return {pass, "lr sequence under 20 non-improving epochs: " + text};
}

Outcome criterion_checkpoint(const EndToEnd& run, const fs::path& dir) {
  const fs::path path = dir / "roundtrip.catu";
  save_checkpoint(run.model, path);
  const auto loaded = load_checkpoint(path);
  const bool same_params = loaded == run.model;
  const bool same_bytes = encode_checkpoint(loaded) == encode_checkpoint(run.model);
  const Tensor probe(Shape{1, 1, kEndToEndSize, kEndToEndSize}, 0.5f);
  const bool same_output = loaded.infer(probe) == run.model.infer(probe);
  return {same_params && same_bytes && same_output,
          fmt::format("{} parameters, {} bytes; parameters {}, re-encoding {}, forward {}", loaded.parameter_count(),
                      fs::file_size(path), same_params ? "identical" : "DIFFER", same_bytes ? "identical" : "DIFFERS",
                      same_output ? "identical" : "DIFFERS")};
}

Outcome criterion_determinism(const EndToEnd& first, const EndToEnd& second) {
  const bool csv = first.report_csv == second.report_csv;
  const bool json = first.metrics_json == second.metrics_json;
  return {csv && json, fmt::format("TrainReport CSV {}, MetricsReport JSON {}", csv ? "identical" : "DIFFERS",
                                   json ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAT-U-Net acceptance gate"};
  std::vector<int> only;
  std::string out_dir;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 8));
  app.add_option("--out", out_dir, "Directory for run artifacts");
  CLI11_PARSE(app, argc, argv);
  log::init_from_env(log::Level::error);

  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8}
                                              : std::set<int>(only.begin(), only.end());
  const fs::path dir = out_dir.empty() ? fs::temp_directory_path() / "catunet_acceptance" : fs::path(out_dir);
  fs::create_directories(dir);

  int failures = 0;
  auto report = [&](int id, const std::string& title, const std::function<Outcome()>& check) {
    if (!selected.contains(id)) return;
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failures += !outcome.pass;
    fmt::print("{} [{}] {}: {}\n", outcome.pass ? "PASS" : "FAIL", id, title, outcome.detail);
    std::fflush(stdout);
  };

  report(1, "gradient checks", criterion_gradcheck);
  report(2, "kernel oracles", criterion_kernel_oracles);
  report(3, "overfit reconstruction", criterion_overfit);

  std::optional<EndToEnd> first, second;
  const bool needs_run = selected.contains(4) || selected.contains(5) || selected.contains(7) || selected.contains(8);
  std::string run_error;
  if (needs_run) {
    try {
      first = run_end_to_end(0);
      std::ofstream(dir / "train_report.csv") << first->report_csv;
      std::ofstream(dir / "metrics.json") << first->metrics_json << "\n";
    } catch (const std::exception& e) {
      run_error = e.what();
    }
  }
  auto with_run = [&](const std::function<Outcome(const EndToEnd&)>& check) {
    return [&, check]() -> Outcome {
      if (!first) return {false, "end-to-end run failed: " + run_error};
      return check(*first);
    };
  };

  report(4, "end-to-end diagnosis", with_run(criterion_diagnosis));
  report(5, "lesion Dice", with_run(criterion_dice));
  report(6, "plateau scheduler", criterion_scheduler);
  report(7, "checkpoint roundtrip", with_run([&](const EndToEnd& run) { return criterion_checkpoint(run, dir); }));
  report(8, "determinism", with_run([&](const EndToEnd& run) {
           second = run_end_to_end(0);
           return criterion_determinism(run, *second);
         }));

  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
