#include <bit>
#include <cstring>
#include <fmt/format.h>
#include <fstream>
#include <iterator>

#include "catunet/errors.hpp"
#include "catunet/model.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace catunet {
namespace {

constexpr char kMagic[4] = {'C', 'A', 'T', 'U'};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(&value);
    out_.insert(out_.end(), bytes, bytes + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), bytes, bytes + size);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    T value{};
    std::memcpy(&value, take(sizeof(T), what), sizeof(T));
    return value;
  }
  const std::uint8_t* take(std::size_t size, const char* what) {
    if (bytes_.size() - offset_ < size) {
      throw CheckpointError(fmt::format("checkpoint truncated while reading {} at byte {} (need {}, have {})", what,
                                        offset_, size, bytes_.size() - offset_));
    }
    const std::uint8_t* p = bytes_.data() + offset_;
    offset_ += size;
    return p;
  }
  bool at_end() const { return offset_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t offset_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const CatUNetModel& model) {
  Writer w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string config = model.config().to_canonical_text();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(config.size()));
  w.put_bytes(config.data(), config.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
    w.put_bytes(p.name.data(), p.name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.put_bytes(p.value.data(), p.value.numel() * sizeof(float));
  }
  return w.take();
}

CatUNetModel decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const std::uint8_t* magic = r.take(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("not a checkpoint: bad magic bytes");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(fmt::format("unsupported checkpoint version {} (expected {})", version, kCheckpointVersion));
  }
  const auto config_length = r.get<std::uint32_t>("config length");
  const std::uint8_t* config_bytes = r.take(config_length, "config block");
  CatUNetConfig config;
  try {
    config = CatUNetConfig::from_canonical_text(std::string(reinterpret_cast<const char*>(config_bytes), config_length));
    config.validate();
  } catch (const ValidationError& e) {
    throw CheckpointError(std::string("checkpoint config block invalid: ") + e.what());
  }

  const auto count = r.get<std::uint32_t>("parameter count");
  std::vector<Parameter> parameters;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_length = r.get<std::uint16_t>("parameter name length");
    const std::uint8_t* name = r.take(name_length, "parameter name");
    Parameter p;
    p.name.assign(reinterpret_cast<const char*>(name), name_length);
    const auto rank = r.get<std::uint8_t>("parameter rank");
    Shape shape;
    for (std::uint8_t d = 0; d < rank; ++d) shape.push_back(r.get<std::uint32_t>("parameter dims"));
    const std::size_t numel = shape_numel(shape);
    if (numel > bytes.size()) throw CheckpointError("checkpoint truncated: parameter '" + p.name + "' too large");
    std::vector<float> values(numel);
    std::memcpy(values.data(), r.take(numel * sizeof(float), "parameter values"), numel * sizeof(float));
    p.value = Tensor(std::move(shape), std::move(values));
    parameters.push_back(std::move(p));
  }
  if (!r.at_end()) throw CheckpointError("checkpoint has trailing bytes");
  try {
    return CatUNetModel::from_parameters(config, std::move(parameters));
  } catch (const ValidationError& e) {
    throw CheckpointError(std::string("checkpoint parameters do not match config: ") + e.what());
  }
}

void save_checkpoint(const CatUNetModel& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

CatUNetModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open checkpoint");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace catunet
