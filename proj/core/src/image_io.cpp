#include "catunet/image_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "catunet/errors.hpp"

#ifdef CATUNET_HAVE_PNG
#include <png.h>
#endif

namespace catunet {
namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open file");
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

class HeaderParser {
 public:
  HeaderParser(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  unsigned long next_number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) throw IoError(path_.string(), "corrupt PGM header");
    unsigned long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > 1'000'000'000UL) throw IoError(path_.string(), "PGM header value out of range");
    }
    return value;
  }
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }
  // Exactly one whitespace byte separates the header from binary data.
  void skip_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw IoError(path_.string(), "corrupt PGM header");
    ++pos_;
  }
  std::size_t pos() const { return pos_; }
  void set_pos(std::size_t p) { pos_ = p; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) {
    throw IoError(path.string(), "unsupported format (expected PGM P5 or P2)");
  }
  const bool binary = bytes[1] == '5';
  HeaderParser parser(bytes, path);
  parser.set_pos(2);
  GrayImage image;
  image.width = parser.next_number();
  image.height = parser.next_number();
  const unsigned long max_value = parser.next_number();
  if (image.width == 0 || image.height == 0) throw IoError(path.string(), "PGM has zero size");
  if (max_value == 0 || max_value > 65535) throw IoError(path.string(), "PGM maxval out of range");
  image.max_value = static_cast<std::uint16_t>(max_value);
  const std::size_t count = image.width * image.height;
  image.pixels.resize(count);

  if (binary) {
    parser.skip_single_space();
    const std::size_t bytes_per_sample = max_value > 255 ? 2 : 1;
    if (bytes.size() - parser.pos() < count * bytes_per_sample) throw IoError(path.string(), "PGM pixel data truncated");
    const std::uint8_t* data = bytes.data() + parser.pos();
    for (std::size_t i = 0; i < count; ++i) {
      image.pixels[i] = bytes_per_sample == 1 ? data[i]
                                              : static_cast<std::uint16_t>((data[2 * i] << 8) | data[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        image.pixels[i] = static_cast<std::uint16_t>(parser.next_number());
      } catch (const IoError&) {
        throw IoError(path.string(), "PGM pixel data truncated");
      }
    }
  }
  for (auto v : image.pixels) {
    if (v > image.max_value) throw IoError(path.string(), "PGM sample exceeds maxval");
  }
  return image;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  if (image.pixels.size() != image.width * image.height) {
    throw ValidationError("write_pgm: pixel count does not match dimensions");
  }
  std::string header = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<char> data(image.pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (image.pixels[i] > 255) throw ValidationError("write_pgm: sample exceeds 255");
    data[i] = static_cast<char>(image.pixels[i]);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

bool png_supported() noexcept {
#ifdef CATUNET_HAVE_PNG
  return true;
#else
  return false;
#endif
}

GrayImage read_png(const std::filesystem::path& path) {
#ifdef CATUNET_HAVE_PNG
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&png, path.string().c_str()) == 0) {
    throw IoError(path.string(), std::string("cannot decode PNG: ") + png.message);
  }
  png.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
  if (png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr) == 0) {
    const std::string message = png.message;
    png_image_free(&png);
    throw IoError(path.string(), "cannot decode PNG: " + message);
  }
  GrayImage image;
  image.width = png.width;
  image.height = png.height;
  image.pixels.assign(buffer.begin(), buffer.end());
  return image;
#else
  throw IoError(path.string(), "PNG support not compiled in (CATUNET_WITH_PNG=OFF)");
#endif
}

GrayImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open file");
  std::array<char, 8> signature{};
  in.read(signature.data(), signature.size());
  const auto got = in.gcount();
  if (got >= 2 && signature[0] == 'P' && (signature[1] == '5' || signature[1] == '2')) return read_pgm(path);
  static constexpr std::array<unsigned char, 8> kPng = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (got == 8 && std::equal(kPng.begin(), kPng.end(), signature.begin(),
                             [](unsigned char a, char b) { return a == static_cast<unsigned char>(b); })) {
    return read_png(path);
  }
  throw IoError(path.string(), "unsupported image format");
}

}  // namespace catunet
