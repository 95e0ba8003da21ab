#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "catunet/data_io.hpp"
#include "catunet/model.hpp"

namespace catunet {

inline constexpr double kDefaultSampleThreshold = 50.0;

struct ThresholdConfig {
  /// Sample threshold T on MSE in squared 0-255 intensity units.
  double sample_threshold = kDefaultSampleThreshold;
  /// Per-pixel threshold on the squared error map; Otsu-selected when unset.
  std::optional<double> pixel_threshold;
  /// Multiplier mapping normalized intensities onto the score scale.
  double intensity_scale = 255.0;

  void validate() const;
};

/// Reconstruction MSE on the 0-255 intensity scale: mean of (255 (x - x_hat))^2.
double reconstruction_score(const Tensor& sample, const Tensor& reconstruction, double intensity_scale = 255.0);

/// Reconstructs one (C,S,S) sample in inference mode and scores it.
double score(const CatUNetModel& model, const Tensor& sample, double intensity_scale = 255.0);

/// Positive iff score <= T (boundary inclusive).
Label classify(double score, const ThresholdConfig& config);

struct ErrorMask {
  /// (H,W) binary mask; 1 marks pixels whose squared error reaches the threshold.
  Tensor mask;
  double pixel_threshold = 0.0;
};

/// Otsu threshold over a 256-bin histogram spanning [0, max(values)]. Returns
/// the lower edge of the first bin of the upper class. When all values are
/// equal, returns max + 1 so that nothing is selected.
double otsu_threshold(std::span<const float> values);

/// Squared error map e = (scale (I - I_hat))^2, channel-averaged, binarized by
/// e >= T_px. T_px comes from the config or Otsu.
ErrorMask error_mask(const Tensor& sample, const Tensor& reconstruction, const ThresholdConfig& config);

struct DiagnosisResult {
  std::string id;
  double score = 0.0;
  Label label = Label::negative;
  std::optional<ErrorMask> mask;
  /// Set when the sample could not be processed; score and label are then meaningless.
  std::optional<std::string> error;

  /// {"id","score","label","mask_path"?} plus "error" for failed samples.
  nlohmann::json to_json(const std::optional<std::string>& mask_path = std::nullopt) const;
};

struct DiagnoseOptions {
  bool with_masks = false;
  /// Worker threads for per-sample scoring; results keep input order.
  int jobs = 1;
};

/// One result per sample, in input order. Per-sample failures are recorded in
/// the result instead of aborting the batch.
std::vector<DiagnosisResult> diagnose_batch(const CatUNetModel& model, std::span<const ImageSample> samples,
                                            const ThresholdConfig& config, const DiagnoseOptions& options = {});

struct Calibration {
  double threshold = 0.0;
  double balanced_accuracy = 0.0;
};

/// Sweeps T over midpoints between sorted validation scores and returns the
/// one maximizing balanced accuracy (ties go to the smallest T).
Calibration calibrate_threshold(std::span<const double> positive_scores, std::span<const double> negative_scores);

}  // namespace catunet
