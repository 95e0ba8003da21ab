#include "catunet/model.hpp"

#include <cmath>
#include <fmt/format.h>
#include <map>
#include <sstream>

#include "catunet/errors.hpp"
#include "catunet/ops.hpp"

namespace catunet {

int CatUNetConfig::level_channels(int level) const {
  long long channels = base_channels;
  for (int i = 1; i < level; ++i) channels *= channel_growth;
  return static_cast<int>(channels);
}

void CatUNetConfig::validate() const {
  std::vector<std::string> violations;
  if (depth < 1) violations.push_back(fmt::format("depth >= 1 (got {})", depth));
  if (base_channels < 1) violations.push_back(fmt::format("base_channels >= 1 (got {})", base_channels));
  if (channel_growth < 1) violations.push_back(fmt::format("channel_growth >= 1 (got {})", channel_growth));
  if (input_channels < 1) violations.push_back(fmt::format("input_channels >= 1 (got {})", input_channels));
  if (resolved_output_channels() < 1) {
    violations.push_back(fmt::format("output_channels >= 1 (got {})", resolved_output_channels()));
  }
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    violations.push_back(fmt::format("kernel_size odd and >= 1 (got {})", kernel_size));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    violations.push_back(fmt::format("0 <= dropout_rate < 1 (got {})", dropout_rate));
  }
  if (input_size < 1) {
    violations.push_back(fmt::format("input_size >= 1 (got {})", input_size));
  } else if (depth >= 1 && depth < 31 && input_size % (1 << depth) != 0) {
    violations.push_back(fmt::format("input_size divisible by 2^depth (got {} with depth {})", input_size, depth));
  }
  if (depth >= 1 && depth < 31 && base_channels >= 1 && channel_growth >= 1) {
    double widest = static_cast<double>(base_channels) * std::pow(static_cast<double>(channel_growth), depth);
    if (widest > 65536.0) violations.push_back(fmt::format("bottleneck width <= 65536 (got {})", widest));
  }
  if (!violations.empty()) {
    std::string message = "invalid CatUNetConfig, violated:";
    for (const auto& v : violations) message += " [" + v + "]";
    throw ValidationError(message);
  }
}

std::string CatUNetConfig::to_canonical_text() const {
  std::map<std::string, std::string> entries{
      {"base_channels", std::to_string(base_channels)},
      {"channel_growth", std::to_string(channel_growth)},
      {"depth", std::to_string(depth)},
      {"dropout_rate", fmt::format("{:.17g}", dropout_rate)},
      {"input_channels", std::to_string(input_channels)},
      {"input_size", std::to_string(input_size)},
      {"kernel_size", std::to_string(kernel_size)},
      {"output_channels", std::to_string(resolved_output_channels())},
  };
  std::string out;
  for (const auto& [key, value] : entries) out += key + "=" + value + "\n";
  return out;
}

CatUNetConfig CatUNetConfig::from_canonical_text(const std::string& text) {
  CatUNetConfig config;
  std::istringstream in(text);
  std::string line;
  std::map<std::string, std::string> entries;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("config text: malformed line '" + line + "'");
    entries[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto take_int = [&](const char* key, int& field) {
    auto it = entries.find(key);
    if (it == entries.end()) throw ValidationError(std::string("config text: missing key ") + key);
    try {
      field = std::stoi(it->second);
    } catch (const std::exception&) {
      throw ValidationError(std::string("config text: bad integer for ") + key);
    }
  };
  take_int("base_channels", config.base_channels);
  take_int("channel_growth", config.channel_growth);
  take_int("depth", config.depth);
  take_int("input_channels", config.input_channels);
  take_int("input_size", config.input_size);
  take_int("kernel_size", config.kernel_size);
  int out_channels = 0;
  take_int("output_channels", out_channels);
  config.output_channels = out_channels;
  auto it = entries.find("dropout_rate");
  if (it == entries.end()) throw ValidationError("config text: missing key dropout_rate");
  try {
    config.dropout_rate = std::stod(it->second);
  } catch (const std::exception&) {
    throw ValidationError("config text: bad number for dropout_rate");
  }
  return config;
}

std::vector<std::pair<std::string, Shape>> CatUNetModel::parameter_layout(const CatUNetConfig& config) {
  config.validate();
  const auto k = static_cast<std::size_t>(config.kernel_size);
  std::vector<std::pair<std::string, Shape>> layout;
  auto conv = [&](const std::string& prefix, int in, int out, std::size_t kernel) {
    layout.emplace_back(prefix + ".weight",
                        Shape{static_cast<std::size_t>(out), static_cast<std::size_t>(in), kernel, kernel});
    layout.emplace_back(prefix + ".bias", Shape{static_cast<std::size_t>(out)});
  };
  const int depth = config.depth;
  int in = config.input_channels;
  for (int level = 1; level <= depth; ++level) {
    const int width = config.level_channels(level);
    conv(fmt::format("encoder.{}.conv1", level), in, width, k);
    conv(fmt::format("encoder.{}.conv2", level), width, width, k);
    in = width;
  }
  conv("bottleneck.conv", in, config.level_channels(depth + 1), k);
  in = config.level_channels(depth + 1);
  for (int level = 1; level <= depth; ++level) {
    const int partner = config.level_channels(depth - level + 1);
    conv(fmt::format("decoder.{}.conv", level), in + partner, partner, k);
    in = partner;
  }
  conv("head", in, config.resolved_output_channels(), 1);
  return layout;
}

std::size_t CatUNetModel::parameter_count(const CatUNetConfig& config) {
  std::size_t total = 0;
  for (const auto& [name, shape] : parameter_layout(config)) total += shape_numel(shape);
  return total;
}

std::size_t CatUNetModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters_) total += p.value.numel();
  return total;
}

CatUNetModel CatUNetModel::build(const CatUNetConfig& config, Rng& init_rng) {
  std::vector<Parameter> parameters;
  for (auto& [name, shape] : parameter_layout(config)) {
    Tensor value(shape);
    if (shape.size() == 4) {
      const double fan_in = static_cast<double>(shape[1] * shape[2] * shape[3]);
      const double stddev = std::sqrt(2.0 / fan_in);
      for (float& v : value.values()) v = static_cast<float>(stddev * init_rng.normal());
    }
    parameters.push_back(Parameter{name, std::move(value)});
  }
  return CatUNetModel(config, std::move(parameters));
}

CatUNetModel CatUNetModel::from_parameters(const CatUNetConfig& config, std::vector<Parameter> parameters) {
  const auto layout = parameter_layout(config);
  if (layout.size() != parameters.size()) {
    throw ValidationError(fmt::format("model expects {} parameter tensors, got {}", layout.size(), parameters.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].first != parameters[i].name) {
      throw ValidationError(fmt::format("parameter {} should be '{}', got '{}'", i, layout[i].first,
                                        parameters[i].name));
    }
    if (layout[i].second != parameters[i].value.shape()) {
      throw ShapeError(fmt::format("parameter '{}' should have shape {}, got {}", layout[i].first,
                                   shape_string(layout[i].second), shape_string(parameters[i].value.shape())));
    }
  }
  return CatUNetModel(config, std::move(parameters));
}

const Parameter& CatUNetModel::parameter(const std::string& name) const {
  for (const auto& p : parameters_) {
    if (p.name == name) return p;
  }
  throw ValidationError("no parameter named '" + name + "'");
}

void CatUNetModel::check_input(const Shape& shape) const {
  const auto channels = static_cast<std::size_t>(config_.input_channels);
  const auto size = static_cast<std::size_t>(config_.input_size);
  if (shape.size() != 4 || shape[1] != channels || shape[2] != size || shape[3] != size) {
    throw ShapeError(fmt::format("layer 'input': expected (N,{},{},{}), got {}", channels, size, size,
                                 shape_string(shape)));
  }
}

ForwardTrace CatUNetModel::forward(Graph& graph, NodeId input, const ForwardOptions& options) const {
  check_input(graph.value(input).shape());
  const bool dropout_active = options.training && config_.dropout_rate > 0.0;
  if (dropout_active && options.rng == nullptr) {
    throw ValidationError("forward: training with dropout requires a dropout Rng");
  }

  ForwardTrace trace;
  trace.parameter_nodes.reserve(parameters_.size());
  for (const auto& p : parameters_) {
    trace.parameter_nodes.push_back(options.track_gradients ? graph.parameter(p.value) : graph.frozen(p.value));
  }
  std::size_t next = 0;
  const ops::Conv2dParams same{1, config_.kernel_size / 2};
  auto conv = [&](NodeId x, ops::Conv2dParams params) {
    const NodeId w = trace.parameter_nodes[next++];
    const NodeId b = trace.parameter_nodes[next++];
    return ops::conv2d(graph, x, w, b, params);
  };

  const int depth = config_.depth;
  std::vector<NodeId> skips;
  NodeId x = input;
  for (int level = 1; level <= depth; ++level) {
    x = ops::relu(graph, conv(x, same));
    x = ops::relu(graph, conv(x, same));
    skips.push_back(x);
    x = ops::maxpool2d(graph, x, {2, 2});
  }
  x = ops::relu(graph, conv(x, same));

  Rng unused(0, Stream::dropout);
  Rng& dropout_rng = options.rng != nullptr ? *options.rng : unused;
  for (int level = 1; level <= depth; ++level) {
    const NodeId up = ops::upsample_nearest(graph, x, 2);
    const NodeId partner = skips[static_cast<std::size_t>(depth - level)];
    const Shape& up_shape = graph.value(up).shape();
    const Shape& partner_shape = graph.value(partner).shape();
    if (up_shape[2] != partner_shape[2] || up_shape[3] != partner_shape[3]) {
      throw ShapeError(fmt::format("layer 'decoder.{}': upsampled map {} and encoder partner {} differ spatially",
                                   level, shape_string(up_shape), shape_string(partner_shape)));
    }
    const NodeId joined = ops::concat_channels(graph, up, partner);
    trace.concat_nodes.push_back(joined);
    x = ops::relu(graph, conv(joined, same));
    x = ops::dropout(graph, x, config_.dropout_rate, options.training, dropout_rng);
  }
  trace.output = conv(x, ops::Conv2dParams{1, 0});
  return trace;
}

Tensor CatUNetModel::infer(const Tensor& batch) const {
  Graph graph;
  const ForwardTrace trace = forward(graph, graph.frozen(batch), ForwardOptions{});
  return graph.value(trace.output);
}

std::vector<double> CatUNetModel::feature_norms(const Tensor& batch) const {
  Graph graph;
  const ForwardTrace trace = forward(graph, graph.frozen(batch), ForwardOptions{});
  std::vector<double> norms;
  for (NodeId node : trace.concat_nodes) {
    double total = 0.0;
    for (float v : graph.value(node).values()) total += static_cast<double>(v) * v;
    norms.push_back(std::sqrt(total));
  }
  return norms;
}

void CatUNetModel::accumulate_gradients(const Graph& graph, const ForwardTrace& trace) {
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    auto grad = parameters_[i].value.ensure_grad();
    const NodeId node = trace.parameter_nodes.at(i);
    if (!graph.has_grad(node)) continue;
    const auto source = graph.grad(node);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += source[j];
  }
}

void CatUNetModel::zero_gradients() {
  for (auto& p : parameters_) {
    p.value.ensure_grad();
    p.value.zero_grad();
  }
}

bool operator==(const CatUNetModel& a, const CatUNetModel& b) {
  if (!(a.config_ == b.config_) || a.parameters_.size() != b.parameters_.size()) return false;
  for (std::size_t i = 0; i < a.parameters_.size(); ++i) {
    if (a.parameters_[i].name != b.parameters_[i].name || !(a.parameters_[i].value == b.parameters_[i].value)) {
      return false;
    }
  }
  return true;
}

}  // namespace catunet
