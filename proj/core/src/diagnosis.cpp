#include "catunet/diagnosis.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fmt/format.h>
#include <thread>

#include "catunet/errors.hpp"

namespace catunet {

void ThresholdConfig::validate() const {
  if (!(sample_threshold >= 0.0)) throw ValidationError(fmt::format("sample threshold must be >= 0, got {}", sample_threshold));
  if (pixel_threshold && !(*pixel_threshold >= 0.0)) {
    throw ValidationError(fmt::format("pixel threshold must be >= 0, got {}", *pixel_threshold));
  }
  if (!(intensity_scale > 0.0)) throw ValidationError("intensity scale must be > 0");
}

double reconstruction_score(const Tensor& sample, const Tensor& reconstruction, double intensity_scale) {
  if (sample.numel() != reconstruction.numel() || sample.numel() == 0) {
    throw ShapeError("score: sample " + shape_string(sample.shape()) + " and reconstruction " +
                     shape_string(reconstruction.shape()) + " differ");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < sample.numel(); ++i) {
    const double d = intensity_scale * (static_cast<double>(sample[i]) - reconstruction[i]);
    total += d * d;
  }
  return total / static_cast<double>(sample.numel());
}

double score(const CatUNetModel& model, const Tensor& sample, double intensity_scale) {
  if (sample.rank() != 3) throw ShapeError("score: expected a (C,H,W) sample, got " + shape_string(sample.shape()));
  const Tensor batch = sample.reshaped(Shape{1, sample.dim(0), sample.dim(1), sample.dim(2)});
  return reconstruction_score(batch, model.infer(batch), intensity_scale);
}

Label classify(double score_value, const ThresholdConfig& config) {
  return score_value <= config.sample_threshold ? Label::positive : Label::negative;
}

double otsu_threshold(std::span<const float> values) {
  if (values.empty()) return 1.0;
  const float max_value = *std::max_element(values.begin(), values.end());
  const float min_value = *std::min_element(values.begin(), values.end());
  if (!(max_value > min_value)) return static_cast<double>(max_value) + 1.0;

  constexpr std::size_t kBins = 256;
  const double width = static_cast<double>(max_value) / kBins;
  std::array<double, kBins> histogram{};
  for (float v : values) {
    const auto bin = std::min(kBins - 1, static_cast<std::size_t>(std::max(0.0, v / width)));
    histogram[bin] += 1.0;
  }
  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (std::size_t b = 0; b < kBins; ++b) sum_all += static_cast<double>(b) * histogram[b];

  double weight_low = 0.0, sum_low = 0.0, best_variance = -1.0;
  std::size_t best_split = 1;
  for (std::size_t split = 1; split < kBins; ++split) {
    weight_low += histogram[split - 1];
    sum_low += static_cast<double>(split - 1) * histogram[split - 1];
    const double weight_high = total - weight_low;
    if (weight_low == 0.0 || weight_high == 0.0) continue;
    const double mean_low = sum_low / weight_low;
    const double mean_high = (sum_all - sum_low) / weight_high;
    const double variance = weight_low * weight_high * (mean_low - mean_high) * (mean_low - mean_high);
    if (variance > best_variance) {
      best_variance = variance;
      best_split = split;
    }
  }
  return static_cast<double>(best_split) * width;
}

ErrorMask error_mask(const Tensor& sample, const Tensor& reconstruction, const ThresholdConfig& config) {
  if (sample.numel() != reconstruction.numel() || sample.rank() < 2) {
    throw ShapeError("error_mask: sample " + shape_string(sample.shape()) + " and reconstruction " +
                     shape_string(reconstruction.shape()) + " differ");
  }
  const std::size_t height = sample.dim(sample.rank() - 2);
  const std::size_t width = sample.dim(sample.rank() - 1);
  const std::size_t plane = height * width;
  const std::size_t channels = sample.numel() / plane;
  std::vector<float> errors(plane, 0.0f);
  for (std::size_t i = 0; i < plane; ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = config.intensity_scale * (static_cast<double>(sample[c * plane + i]) - reconstruction[c * plane + i]);
      total += d * d;
    }
    errors[i] = static_cast<float>(total / static_cast<double>(channels));
  }
  ErrorMask out{Tensor(Shape{height, width}), config.pixel_threshold.value_or(otsu_threshold(errors))};
  for (std::size_t i = 0; i < plane; ++i) out.mask[i] = errors[i] >= out.pixel_threshold ? 1.0f : 0.0f;
  return out;
}

nlohmann::json DiagnosisResult::to_json(const std::optional<std::string>& mask_path) const {
  nlohmann::json j{{"id", id}};
  if (error) {
    j["score"] = nullptr;
    j["label"] = nullptr;
    j["error"] = *error;
    return j;
  }
  j["score"] = score;
  j["label"] = label_name(label);
  if (mask_path) j["mask_path"] = *mask_path;
  return j;
}

std::vector<DiagnosisResult> diagnose_batch(const CatUNetModel& model, std::span<const ImageSample> samples,
                                            const ThresholdConfig& config, const DiagnoseOptions& options) {
  config.validate();
  std::vector<DiagnosisResult> results(samples.size());
  auto process = [&](std::size_t i) {
    DiagnosisResult& r = results[i];
    r.id = samples[i].id;
    try {
      const Tensor& pixels = samples[i].pixels;
      if (pixels.rank() != 3) throw ShapeError("expected (C,H,W), got " + shape_string(pixels.shape()));
      const Tensor batch = pixels.reshaped(Shape{1, pixels.dim(0), pixels.dim(1), pixels.dim(2)});
      const Tensor reconstruction = model.infer(batch);
      r.score = reconstruction_score(batch, reconstruction, config.intensity_scale);
      r.label = classify(r.score, config);
      if (options.with_masks) r.mask = error_mask(batch, reconstruction, config);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  };

  const std::size_t workers = std::min<std::size_t>(std::max(1, options.jobs), samples.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < samples.size(); ++i) process(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < samples.size(); i = next++) process(i);
    });
  }
  pool.clear();
  return results;
}

Calibration calibrate_threshold(std::span<const double> positive_scores, std::span<const double> negative_scores) {
  if (positive_scores.empty() && negative_scores.empty()) {
    throw ValidationError("calibrate_threshold: no validation scores");
  }
  std::vector<double> all(positive_scores.begin(), positive_scores.end());
  all.insert(all.end(), negative_scores.begin(), negative_scores.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> candidates{std::max(0.0, all.front() * 0.5)};
  for (std::size_t i = 0; i + 1 < all.size(); ++i) candidates.push_back(0.5 * (all[i] + all[i + 1]));
  candidates.push_back(all.back() + 1.0);

  auto balanced = [&](double t) {
    double parts = 0.0, terms = 0.0;
    if (!positive_scores.empty()) {
      const auto hits = std::count_if(positive_scores.begin(), positive_scores.end(), [t](double s) { return s <= t; });
      parts += static_cast<double>(hits) / static_cast<double>(positive_scores.size());
      terms += 1.0;
    }
    if (!negative_scores.empty()) {
      const auto hits = std::count_if(negative_scores.begin(), negative_scores.end(), [t](double s) { return s > t; });
      parts += static_cast<double>(hits) / static_cast<double>(negative_scores.size());
      terms += 1.0;
    }
    return parts / terms;
  };

  Calibration best{candidates.front(), balanced(candidates.front())};
  for (double t : candidates) {
    const double b = balanced(t);
    if (b > best.balanced_accuracy) best = Calibration{t, b};
  }
  return best;
}

}  // namespace catunet
