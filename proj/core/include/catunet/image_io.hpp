#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace catunet {

/// Single-channel image as decoded from disk, before normalization.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  /// Largest representable sample value (255 for 8-bit data).
  std::uint16_t max_value = 255;
  std::vector<std::uint16_t> pixels;
};

/// Binary (P5) or ASCII (P2) PGM with maxval up to 65535.
GrayImage read_pgm(const std::filesystem::path& path);
/// Writes binary P5 with maxval 255; values above 255 are rejected.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

bool png_supported() noexcept;
/// 8-bit grayscale PNG. Throws IoError when built without PNG support.
GrayImage read_png(const std::filesystem::path& path);

/// Dispatches on the file signature.
GrayImage read_image(const std::filesystem::path& path);

}  // namespace catunet
