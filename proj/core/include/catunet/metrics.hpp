#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "catunet/data_io.hpp"
#include "catunet/tensor.hpp"

namespace catunet {

struct ReconstructionAccuracy {
  double value = 0.0;
  /// Unclamped 1 - mean(MSE); negative for very poor reconstructions.
  double raw = 0.0;
  bool clamped = false;
};

/// 1 - (1/N) sum_i mse(I_i, I_hat_i) on the normalized [0,1] scale, clamped to
/// [0,1] with a logged warning.
ReconstructionAccuracy reconstruction_accuracy(std::span<const Tensor> originals,
                                               std::span<const Tensor> reconstructions);

/// Per-image mean squared error on the normalized scale (double accumulation).
double image_mse(const Tensor& a, const Tensor& b);

/// 2|X n Y| / (|X| + |Y|). Two empty masks score 1.0. Non-binary input throws.
double dice(const Tensor& prediction, const Tensor& truth);

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  /// Rates are empty when their denominator is zero.
  std::optional<double> sensitivity() const;
  std::optional<double> specificity() const;
  std::optional<double> accuracy() const;
  std::optional<double> balanced_accuracy() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Counts with Positive as the positive class.
ConfusionMatrix confusion(std::span<const Label> predicted, std::span<const Label> truth);

struct MetricsReport {
  std::optional<double> reconstruction_accuracy;
  std::optional<double> dice;
  std::optional<ConfusionMatrix> confusion;
  std::optional<double> threshold;
  std::size_t samples = 0;
  std::size_t failed_samples = 0;

  /// Flat object; undefined or absent values are null.
  nlohmann::json to_json() const;
  /// 2x2 layout: header row, then one row per actual class.
  std::string confusion_csv() const;
};

}  // namespace catunet
