#include "catunet/metrics.hpp"

#include <fmt/format.h>

#include "catunet/errors.hpp"
#include "catunet/log.hpp"

namespace catunet {
namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

double image_mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mse: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  if (a.numel() == 0) throw ValidationError("mse: empty images");
  double total = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    total += d * d;
  }
  return total / static_cast<double>(a.numel());
}

ReconstructionAccuracy reconstruction_accuracy(std::span<const Tensor> originals,
                                               std::span<const Tensor> reconstructions) {
  if (originals.empty()) throw ValidationError("reconstruction_accuracy: no images");
  if (originals.size() != reconstructions.size()) {
    throw ValidationError(fmt::format("reconstruction_accuracy: {} originals but {} reconstructions",
                                      originals.size(), reconstructions.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < originals.size(); ++i) total += image_mse(originals[i], reconstructions[i]);
  ReconstructionAccuracy result;
  result.raw = 1.0 - total / static_cast<double>(originals.size());
  result.value = result.raw;
  if (result.raw < 0.0 || result.raw > 1.0) {
    result.value = std::clamp(result.raw, 0.0, 1.0);
    result.clamped = true;
    log::warn(fmt::format("reconstruction accuracy {} outside [0,1], clamped", result.raw));
  }
  return result;
}

double dice(const Tensor& prediction, const Tensor& truth) {
  if (prediction.numel() != truth.numel()) {
    throw ShapeError("dice: shape mismatch " + shape_string(prediction.shape()) + " vs " +
                     shape_string(truth.shape()));
  }
  std::size_t both = 0, predicted = 0, actual = 0;
  for (std::size_t i = 0; i < prediction.numel(); ++i) {
    const float p = prediction[i], t = truth[i];
    if ((p != 0.0f && p != 1.0f) || (t != 0.0f && t != 1.0f)) {
      throw ValidationError(fmt::format("dice: non-binary value at index {} (prediction {}, truth {})", i, p, t));
    }
    predicted += p == 1.0f;
    actual += t == 1.0f;
    both += p == 1.0f && t == 1.0f;
  }
  if (predicted + actual == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(predicted + actual);
}

std::optional<double> ConfusionMatrix::sensitivity() const { return ratio(tp, tp + fn); }
std::optional<double> ConfusionMatrix::specificity() const { return ratio(tn, tn + fp); }
std::optional<double> ConfusionMatrix::accuracy() const { return ratio(tp + tn, total()); }

std::optional<double> ConfusionMatrix::balanced_accuracy() const {
  const auto sens = sensitivity();
  const auto spec = specificity();
  if (!sens || !spec) return std::nullopt;
  return 0.5 * (*sens + *spec);
}

ConfusionMatrix confusion(std::span<const Label> predicted, std::span<const Label> truth) {
  if (predicted.size() != truth.size()) {
    throw ValidationError(
        fmt::format("confusion: {} predictions but {} ground-truth labels", predicted.size(), truth.size()));
  }
  ConfusionMatrix m;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool said_positive = predicted[i] == Label::positive;
    const bool is_positive = truth[i] == Label::positive;
    if (said_positive && is_positive) ++m.tp;
    else if (said_positive) ++m.fp;
    else if (is_positive) ++m.fn;
    else ++m.tn;
  }
  return m;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["samples"] = samples;
  j["failed_samples"] = failed_samples;
  j["reconstruction_accuracy"] = optional_json(reconstruction_accuracy);
  j["dice"] = optional_json(dice);
  j["threshold"] = optional_json(threshold);
  if (confusion) {
    j["tp"] = confusion->tp;
    j["fp"] = confusion->fp;
    j["tn"] = confusion->tn;
    j["fn"] = confusion->fn;
  } else {
    j["tp"] = j["fp"] = j["tn"] = j["fn"] = nullptr;
  }
  j["sensitivity"] = confusion ? optional_json(confusion->sensitivity()) : nlohmann::json();
  j["specificity"] = confusion ? optional_json(confusion->specificity()) : nlohmann::json();
  j["accuracy"] = confusion ? optional_json(confusion->accuracy()) : nlohmann::json();
  return j;
}

std::string MetricsReport::confusion_csv() const {
  if (!confusion) return "actual,predicted_positive,predicted_negative\n";
  return fmt::format("actual,predicted_positive,predicted_negative\nPositive,{},{}\nNegative,{},{}\n", confusion->tp,
                     confusion->fn, confusion->fp, confusion->tn);
}

}  // namespace catunet
