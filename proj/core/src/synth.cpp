#include "catunet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <numbers>

#include "catunet/errors.hpp"
#include "catunet/image_io.hpp"
#include "catunet/rng.hpp"

namespace catunet {
namespace {

constexpr int kBlobs = 4;
constexpr double kBlobAmplitude = 0.12;
constexpr double kLesionProfileExponent = 0.3;
constexpr std::uint64_t kNegativeIndexOffset = 1ULL << 32;

std::string sample_id(Label label, int index) {
  return fmt::format("{}_{:04d}", label == Label::positive ? "pos" : "neg", index);
}

}  // namespace

double SynthConfig::resolved_radius_min() const {
  return lesion_radius_min > 0.0 ? lesion_radius_min : image_size / 12.0;
}

double SynthConfig::resolved_radius_max() const {
  return lesion_radius_max > 0.0 ? lesion_radius_max : image_size / 6.0;
}

void SynthConfig::validate() const {
  if (image_size < 4) throw ValidationError("synth: image_size must be >= 4");
  if (n_positive < 0 || n_negative < 0) throw ValidationError("synth: sample counts must be non-negative");
  if (!(noise_std >= 0.0)) throw ValidationError("synth: noise_std must be >= 0");
  const double lo = resolved_radius_min(), hi = resolved_radius_max();
  if (!(lo > 0.0 && lo <= hi)) throw ValidationError("synth: lesion radius range must satisfy 0 < min <= max");
  if (!(hi < image_size / 2.0 - 1.0)) {
    throw ValidationError(fmt::format("synth: lesion radius {} must be below image_size/2 - 1", hi));
  }
}

SynthSample synthesize_sample(const SynthConfig& config, Label label, int index) {
  config.validate();
  const std::uint64_t stream_index =
      static_cast<std::uint64_t>(index) + (label == Label::negative ? kNegativeIndexOffset : 0);
  Rng rng = Rng(config.seed, Stream::synthesis).child(stream_index);
  const auto size = static_cast<std::size_t>(config.image_size);
  const double s = config.image_size;

  std::vector<double> field(size * size, label == Label::positive ? config.positive_baseline
                                                                  : config.negative_baseline);
  for (int b = 0; b < kBlobs; ++b) {
    const double cx = rng.uniform(0.0, s), cy = rng.uniform(0.0, s);
    const double sigma = rng.uniform(s / 6.0, s / 3.0);
    const double amplitude = rng.uniform(-kBlobAmplitude, kBlobAmplitude);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        field[y * size + x] += amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      }
    }
  }

  SynthSample out;
  out.sample.id = sample_id(label, index);
  out.sample.truth_label = label;
  if (label == Label::positive) {
    LesionGeometry lesion;
    lesion.radius_a = rng.uniform(config.resolved_radius_min(), config.resolved_radius_max());
    lesion.radius_b = rng.uniform(config.resolved_radius_min(), config.resolved_radius_max());
    const double reach = std::max(lesion.radius_a, lesion.radius_b) + 1.0;
    lesion.center_x = rng.uniform(reach, s - reach);
    lesion.center_y = rng.uniform(reach, s - reach);
    lesion.angle = rng.uniform(0.0, std::numbers::pi);
    const double c = std::cos(lesion.angle), sn = std::sin(lesion.angle);
    Tensor mask(Shape{size, size});
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double dx = static_cast<double>(x) - lesion.center_x, dy = static_cast<double>(y) - lesion.center_y;
        const double u = (dx * c + dy * sn) / lesion.radius_a;
        const double v = (-dx * sn + dy * c) / lesion.radius_b;
        const double q = u * u + v * v;
        if (q < 1.0) {
          field[y * size + x] += config.lesion_amplitude * std::pow(1.0 - q, kLesionProfileExponent);
          mask[y * size + x] = 1.0f;
        }
      }
    }
    out.lesion = lesion;
    out.sample.truth_mask = std::move(mask);
  }

  Tensor pixels(Shape{1, size, size});
  const float scale = 1.0f / 255.0f;
  for (std::size_t i = 0; i < size * size; ++i) {
    const double noisy = std::clamp(field[i] + config.noise_std * rng.normal(), 0.0, 1.0);
    pixels[i] = static_cast<float>(std::lround(noisy * 255.0)) * scale;
  }
  out.sample.pixels = std::move(pixels);
  return out;
}

std::vector<SynthSample> synthesize_samples(const SynthConfig& config) {
  config.validate();
  std::vector<SynthSample> samples;
  for (int i = 0; i < config.n_positive; ++i) samples.push_back(synthesize_sample(config, Label::positive, i));
  for (int i = 0; i < config.n_negative; ++i) samples.push_back(synthesize_sample(config, Label::negative, i));
  return samples;
}

nlohmann::json synthesize(const SynthConfig& config, const std::filesystem::path& root) {
  config.validate();
  std::error_code ec;
  for (const char* sub : {"positive", "negative", "masks"}) {
    std::filesystem::create_directories(root / sub, ec);
    if (ec) throw IoError((root / sub).string(), "cannot create directory: " + ec.message());
  }
  nlohmann::json manifest;
  manifest["seed"] = config.seed;
  manifest["config"] = {
      {"image_size", config.image_size},
      {"n_positive", config.n_positive},
      {"n_negative", config.n_negative},
      {"lesion_radius_range", {config.resolved_radius_min(), config.resolved_radius_max()}},
      {"lesion_amplitude", config.lesion_amplitude},
      {"noise_std", config.noise_std},
      {"positive_baseline", config.positive_baseline},
      {"negative_baseline", config.negative_baseline},
  };
  manifest["samples"] = nlohmann::json::array();

  auto to_gray = [](const Tensor& pixels) {
    GrayImage image{pixels.dim(2), pixels.dim(1), 255, std::vector<std::uint16_t>(pixels.numel())};
    for (std::size_t i = 0; i < pixels.numel(); ++i) {
      image.pixels[i] = static_cast<std::uint16_t>(std::lround(pixels[i] * 255.0f));
    }
    return image;
  };

  for (const SynthSample& s : synthesize_samples(config)) {
    const bool positive = s.sample.truth_label == Label::positive;
    const std::string file = (positive ? "positive/" : "negative/") + s.sample.id + ".pgm";
    write_pgm(root / file, to_gray(s.sample.pixels));
    nlohmann::json entry{{"id", s.sample.id}, {"label", label_name(*s.sample.truth_label)}, {"file", file}};
    if (positive) {
      const std::string mask_file = "masks/" + s.sample.id + ".pgm";
      write_mask(root / mask_file, *s.sample.truth_mask);
      entry["mask"] = mask_file;
      entry["lesion"] = {{"center", {s.lesion->center_x, s.lesion->center_y}},
                         {"radii", {s.lesion->radius_a, s.lesion->radius_b}},
                         {"angle", s.lesion->angle}};
    }
    manifest["samples"].push_back(std::move(entry));
  }

  std::ofstream out(root / "manifest.json", std::ios::trunc);
  if (!out) throw IoError((root / "manifest.json").string(), "cannot open for writing");
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError((root / "manifest.json").string(), "write failed");
  return manifest;
}

}  // namespace catunet
