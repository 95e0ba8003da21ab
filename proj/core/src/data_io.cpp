#include "catunet/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "catunet/errors.hpp"
#include "catunet/image_io.hpp"
#include "catunet/log.hpp"

namespace catunet {
namespace {

bool is_image_file(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".pgm" || ext == ".PGM" || (png_supported() && (ext == ".png" || ext == ".PNG"));
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

Tensor mask_from_image(const GrayImage& image) {
  Tensor mask(Shape{image.height, image.width});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) mask[i] = image.pixels[i] > 0 ? 1.0f : 0.0f;
  return mask;
}

}  // namespace

std::string_view label_name(Label label) { return label == Label::positive ? "Positive" : "Negative"; }

ImageSample load_image(const std::filesystem::path& path) {
  const GrayImage image = read_image(path);
  Tensor pixels(Shape{1, image.height, image.width});
  const float scale = 1.0f / static_cast<float>(image.max_value);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) pixels[i] = static_cast<float>(image.pixels[i]) * scale;
  return ImageSample{path.stem().string(), std::move(pixels), std::nullopt, std::nullopt};
}

Tensor resize_bilinear(const Tensor& image, int target) {
  if (target < 1) throw ValidationError("resize: target must be >= 1, got " + std::to_string(target));
  if (image.rank() != 3) throw ShapeError("resize: expected (C,H,W), got " + shape_string(image.shape()));
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  const auto size = static_cast<std::size_t>(target);
  if (height == size && width == size) return image;

  Tensor out(Shape{channels, size, size});
  auto source_coord = [](std::size_t i, std::size_t in, std::size_t outn, std::size_t& lo, std::size_t& hi,
                         double& frac) {
    double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(outn) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    lo = static_cast<std::size_t>(std::floor(s));
    hi = std::min(lo + 1, in - 1);
    frac = s - static_cast<double>(lo);
  };
  for (std::size_t y = 0; y < size; ++y) {
    std::size_t y0, y1;
    double fy;
    source_coord(y, height, size, y0, y1, fy);
    for (std::size_t x = 0; x < size; ++x) {
      std::size_t x0, x1;
      double fx;
      source_coord(x, width, size, x0, x1, fx);
      for (std::size_t c = 0; c < channels; ++c) {
        const float* plane = image.data() + c * height * width;
        const double top = plane[y0 * width + x0] * (1.0 - fx) + plane[y0 * width + x1] * fx;
        const double bottom = plane[y1 * width + x0] * (1.0 - fx) + plane[y1 * width + x1] * fx;
        out[(c * size + y) * size + x] = static_cast<float>(top * (1.0 - fy) + bottom * fy);
      }
    }
  }
  return out;
}

ImageSample resize(const ImageSample& sample, int target) {
  ImageSample out = sample;
  out.pixels = resize_bilinear(sample.pixels, target);
  for (float& v : out.pixels.values()) v = std::clamp(v, 0.0f, 1.0f);
  if (sample.truth_mask && (sample.truth_mask->dim(0) != static_cast<std::size_t>(target) ||
                            sample.truth_mask->dim(1) != static_cast<std::size_t>(target))) {
    const Tensor& mask = *sample.truth_mask;
    const std::size_t height = mask.dim(0), width = mask.dim(1);
    const auto size = static_cast<std::size_t>(target);
    Tensor resized(Shape{size, size});
    for (std::size_t y = 0; y < size; ++y) {
      const std::size_t sy = std::min(height - 1, y * height / size);
      for (std::size_t x = 0; x < size; ++x) {
        resized[y * size + x] = mask[sy * width + std::min(width - 1, x * width / size)];
      }
    }
    out.truth_mask = std::move(resized);
  }
  return out;
}

ImageSample preprocess(const ImageSample& sample, int target, int channels) {
  if (channels < 1) throw ValidationError("preprocess: channels must be >= 1");
  ImageSample out = resize(sample, target);
  const std::size_t have = out.pixels.dim(0);
  const auto want = static_cast<std::size_t>(channels);
  if (have == want) return out;
  if (have != 1) {
    throw ShapeError("preprocess: cannot map " + std::to_string(have) + " channels to " + std::to_string(want));
  }
  const std::size_t plane = out.pixels.dim(1) * out.pixels.dim(2);
  Tensor replicated(Shape{want, out.pixels.dim(1), out.pixels.dim(2)});
  for (std::size_t c = 0; c < want; ++c) std::copy_n(out.pixels.data(), plane, replicated.data() + c * plane);
  out.pixels = std::move(replicated);
  return out;
}

Dataset load_dataset(const std::filesystem::path& root) {
  const auto positive_dir = root / "positive";
  if (!std::filesystem::is_directory(positive_dir)) {
    throw ValidationError("dataset " + root.string() + ": missing positive/ directory");
  }
  Dataset dataset;
  for (const auto& path : list_images(positive_dir)) {
    ImageSample s = load_image(path);
    s.truth_label = Label::positive;
    dataset.positives.push_back(std::move(s));
  }
  if (std::filesystem::is_directory(root / "negative")) {
    for (const auto& path : list_images(root / "negative")) {
      ImageSample s = load_image(path);
      s.truth_label = Label::negative;
      dataset.negatives.push_back(std::move(s));
    }
  }
  if (std::filesystem::is_directory(root / "masks")) {
    std::map<std::string, ImageSample*> by_stem;
    for (auto& s : dataset.positives) by_stem[s.id] = &s;
    for (const auto& path : list_images(root / "masks")) {
      const std::string stem = path.stem().string();
      auto it = by_stem.find(stem);
      if (it == by_stem.end()) {
        dataset.orphan_masks.push_back(path.filename().string());
        log::warn("dataset " + root.string() + ": mask '" + path.filename().string() + "' has no positive image");
        continue;
      }
      Tensor mask = mask_from_image(read_image(path));
      const Tensor& pixels = it->second->pixels;
      if (mask.dim(0) != pixels.dim(1) || mask.dim(1) != pixels.dim(2)) {
        throw ShapeError("mask " + path.string() + " is " + shape_string(mask.shape()) + " but image is " +
                         shape_string(pixels.shape()));
      }
      it->second->truth_mask = std::move(mask);
    }
  }
  if (dataset.positives.empty() && dataset.negatives.empty()) {
    throw ValidationError("dataset " + root.string() + " contains no images");
  }
  return dataset;
}

std::vector<ImageSample> load_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError(dir.string() + " is not a directory");
  std::vector<ImageSample> samples;
  for (const auto& path : list_images(dir)) samples.push_back(load_image(path));
  if (samples.empty()) throw ValidationError("directory " + dir.string() + " contains no images");
  return samples;
}

Tensor stack_batch(std::span<const ImageSample> samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ValidationError("stack_batch: empty selection");
  const Shape& first = samples[indices[0]].pixels.shape();
  const std::size_t block = shape_numel(first);
  Tensor batch(Shape{indices.size(), first[0], first[1], first[2]});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor& pixels = samples[indices[i]].pixels;
    if (pixels.shape() != first) {
      throw ShapeError("stack_batch: sample '" + samples[indices[i]].id + "' has shape " +
                       shape_string(pixels.shape()) + ", expected " + shape_string(first));
    }
    std::copy_n(pixels.data(), block, batch.data() + i * block);
  }
  return batch;
}

Tensor stack_batch(std::span<const ImageSample> samples) {
  std::vector<std::size_t> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return stack_batch(samples, all);
}

void write_mask(const std::filesystem::path& path, const Tensor& mask) {
  const std::size_t height = mask.dim(mask.rank() - 2);
  const std::size_t width = mask.dim(mask.rank() - 1);
  GrayImage image{width, height, 255, std::vector<std::uint16_t>(width * height)};
  for (std::size_t i = 0; i < image.pixels.size(); ++i) image.pixels[i] = mask[i] > 0.5f ? 255 : 0;
  write_pgm(path, image);
}

}  // namespace catunet
