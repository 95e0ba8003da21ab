#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "catunet/autodiff.hpp"
#include "catunet/rng.hpp"
#include "catunet/tensor.hpp"

namespace catunet {

struct CatUNetConfig {
  int input_channels = 1;
  int input_size = 256;
  /// Number of encoder levels (and of decoder levels).
  int depth = 3;
  int base_channels = 16;
  int channel_growth = 2;
  int kernel_size = 3;
  double dropout_rate = 0.5;
  /// Defaults to input_channels when unset.
  std::optional<int> output_channels;

  int resolved_output_channels() const { return output_channels.value_or(input_channels); }
  /// Channels produced by encoder level `level` (1-based); level depth+1 is the bottleneck.
  int level_channels(int level) const;

  /// Throws ValidationError listing every violated invariant.
  void validate() const;

  /// Canonical key-sorted `key=value` lines; also the checkpoint config block.
  std::string to_canonical_text() const;
  static CatUNetConfig from_canonical_text(const std::string& text);

  /// Compares resolved values, so an unset output_channels equals an explicit one.
  friend bool operator==(const CatUNetConfig& a, const CatUNetConfig& b) {
    return a.to_canonical_text() == b.to_canonical_text();
  }
};

struct Parameter {
  std::string name;
  Tensor value;
};

/// Node ids produced while tracing one forward pass.
struct ForwardTrace {
  NodeId output = 0;
  /// Concatenated feature map of each decoder level, shallowest level last.
  std::vector<NodeId> concat_nodes;
  /// Leaf node of every parameter, aligned with CatUNetModel::parameters().
  std::vector<NodeId> parameter_nodes;
};

struct ForwardOptions {
  bool training = false;
  /// Bind parameters as gradient-receiving leaves.
  bool track_gradients = false;
  /// Dropout stream; required when training with a non-zero dropout rate.
  Rng* rng = nullptr;
};

/// Encoder-decoder with concatenation skips.
///
///   encoder level l : conv -> ReLU -> conv -> ReLU -> (skip) -> maxpool
///   bottleneck      : conv -> ReLU
///   decoder level k : upsample -> concat(skip of encoder level depth-k+1) -> conv -> ReLU -> dropout
///   head            : 1x1 conv, linear
///
/// All spatial convolutions use "same" padding, so every skip partner has the
/// spatial size of the upsampled decoder map it is joined with.
class CatUNetModel {
 public:
  /// Builds the wiring and He-initializes weights from `init_rng`; biases are zero.
  static CatUNetModel build(const CatUNetConfig& config, Rng& init_rng);
  /// Wraps existing parameters, validating names and shapes against the config.
  static CatUNetModel from_parameters(const CatUNetConfig& config, std::vector<Parameter> parameters);

  const CatUNetConfig& config() const noexcept { return config_; }
  const std::vector<Parameter>& parameters() const noexcept { return parameters_; }
  std::vector<Parameter>& parameters() noexcept { return parameters_; }
  const Parameter& parameter(const std::string& name) const;
  std::size_t parameter_count() const;

  /// Expected parameter shapes, in registry order, for a config.
  static std::vector<std::pair<std::string, Shape>> parameter_layout(const CatUNetConfig& config);
  static std::size_t parameter_count(const CatUNetConfig& config);

  ForwardTrace forward(Graph& graph, NodeId input, const ForwardOptions& options) const;

  /// Inference-mode reconstruction of a (N,C,S,S) batch.
  Tensor infer(const Tensor& batch) const;

  /// L2 norm of each decoder level's concatenated feature map, inference mode,
  /// computed over the whole batch tensor.
  std::vector<double> feature_norms(const Tensor& batch) const;

  /// Adds the gradients held by `graph` into each parameter's grad buffer.
  void accumulate_gradients(const Graph& graph, const ForwardTrace& trace);
  void zero_gradients();

  friend bool operator==(const CatUNetModel& a, const CatUNetModel& b);

 private:
  CatUNetModel(CatUNetConfig config, std::vector<Parameter> parameters)
      : config_(std::move(config)), parameters_(std::move(parameters)) {}

  void check_input(const Shape& shape) const;

  CatUNetConfig config_;
  std::vector<Parameter> parameters_;
};

/// Checkpoint encoding: "CATU", u32 version (1), u32 config length + canonical
/// config text, u32 parameter count, then per parameter u16 name length, name,
/// u8 rank, u32 dims, raw float32 values. All integers little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const CatUNetModel& model);
CatUNetModel decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const CatUNetModel& model, const std::filesystem::path& path);
CatUNetModel load_checkpoint(const std::filesystem::path& path);

}  // namespace catunet
