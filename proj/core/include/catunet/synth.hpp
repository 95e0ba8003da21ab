#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <vector>

#include "catunet/data_io.hpp"

namespace catunet {

/// Deterministic stand-in corpus.
///
/// Every image is a smooth tissue background (a baseline level plus a few
/// broad Gaussian blobs) with additive Gaussian noise. Positive-condition
/// images add one bright elliptical lesion and come with its exact mask.
/// The two classes use different tissue baselines, so a reconstructor fitted
/// to positives sees negatives as out of distribution.
struct SynthConfig {
  int image_size = 64;
  int n_positive = 25;
  int n_negative = 25;
  /// Lesion semi-axis range in pixels; zero selects image_size/12 .. image_size/6.
  double lesion_radius_min = 0.0;
  double lesion_radius_max = 0.0;
  double lesion_amplitude = 0.45;
  double noise_std = 0.02;
  double positive_baseline = 0.35;
  double negative_baseline = 0.10;
  std::uint64_t seed = 0;

  double resolved_radius_min() const;
  double resolved_radius_max() const;
  void validate() const;
};

struct LesionGeometry {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius_a = 0.0;
  double radius_b = 0.0;
  double angle = 0.0;
};

struct SynthSample {
  ImageSample sample;
  std::optional<LesionGeometry> lesion;
};

/// Generates sample `index` of the given class. Pixels are quantized to 8 bits
/// exactly as they would be after a write/read cycle through PGM.
SynthSample synthesize_sample(const SynthConfig& config, Label label, int index);

/// All positives followed by all negatives.
std::vector<SynthSample> synthesize_samples(const SynthConfig& config);

/// Writes root/positive/pos_NNNN.pgm, root/masks/pos_NNNN.pgm,
/// root/negative/neg_NNNN.pgm and root/manifest.json. Returns the manifest.
nlohmann::json synthesize(const SynthConfig& config, const std::filesystem::path& root);

}  // namespace catunet
