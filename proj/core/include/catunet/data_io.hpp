#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catunet/tensor.hpp"

namespace catunet {

enum class Label { positive, negative };

std::string_view label_name(Label label);  // "Positive" / "Negative"

struct ImageSample {
  std::string id;
  /// (C,H,W) with values in [0,1].
  Tensor pixels;
  std::optional<Label> truth_label;
  /// (H,W) binary mask, 1 marks lesion pixels.
  std::optional<Tensor> truth_mask;
};

/// Decodes a grayscale image (PGM, or PNG when enabled) into a (1,H,W) sample
/// scaled by 1/maxval. The id is the file stem.
ImageSample load_image(const std::filesystem::path& path);

/// Bilinear resampling of a (C,H,W) tensor with pixel-center alignment.
Tensor resize_bilinear(const Tensor& image, int target);

/// Resizes pixels bilinearly and the truth mask by nearest neighbour, so the
/// mask stays binary. Values are clamped to [0,1].
ImageSample resize(const ImageSample& sample, int target);

/// Resize to target x target, clamp to [0,1] and replicate a single channel up
/// to `channels`. Idempotent.
ImageSample preprocess(const ImageSample& sample, int target, int channels);

struct Dataset {
  std::vector<ImageSample> positives;
  std::vector<ImageSample> negatives;
  /// Mask files without a matching positive image.
  std::vector<std::string> orphan_masks;
};

/// Loads root/positive, root/negative (optional) and root/masks (optional).
/// Files are ordered by byte-wise name comparison; masks pair with positives by stem.
Dataset load_dataset(const std::filesystem::path& root);

/// Loads every image directly inside `dir` without labels, in byte-wise name order.
std::vector<ImageSample> load_images(const std::filesystem::path& dir);

/// Stacks (C,H,W) samples selected by `indices` into an (N,C,H,W) batch.
Tensor stack_batch(std::span<const ImageSample> samples, std::span<const std::size_t> indices);
Tensor stack_batch(std::span<const ImageSample> samples);

/// Writes a (H,W) or (1,H,W) binary mask as PGM with values 0/255.
void write_mask(const std::filesystem::path& path, const Tensor& mask);

}  // namespace catunet
