#include "catunet/autodiff.hpp"

#include <algorithm>
#include <string>

#include "catunet/errors.hpp"

namespace catunet {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::constant: return "constant";
    case OpKind::parameter: return "parameter";
    case OpKind::conv2d: return "conv2d";
    case OpKind::maxpool2d: return "maxpool2d";
    case OpKind::upsample_nearest: return "upsample_nearest";
    case OpKind::concat_channels: return "concat_channels";
    case OpKind::relu: return "relu";
    case OpKind::dropout: return "dropout";
    case OpKind::mse: return "mse";
    case OpKind::sum_squares: return "sum_squares";
    case OpKind::add: return "add";
    case OpKind::scale: return "scale";
  }
  return "unknown";
}

NodeId Graph::constant(Tensor value, bool requires_grad) {
  Node node;
  node.kind = OpKind::constant;
  node.owned = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

NodeId Graph::parameter(const Tensor& value) {
  Node node;
  node.kind = OpKind::parameter;
  node.external = &value;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

NodeId Graph::frozen(const Tensor& value) {
  Node node;
  node.kind = OpKind::constant;
  node.external = &value;
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

NodeId Graph::record(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward) {
  const NodeId id = nodes_.size();
  bool needs_grad = false;
  for (NodeId input : inputs) {
    if (input >= id) {
      throw ValidationError("graph: node " + std::to_string(id) + " references input " + std::to_string(input) +
                            " that does not precede it");
    }
    needs_grad = needs_grad || nodes_[input].requires_grad;
  }
  Node node;
  node.kind = kind;
  node.inputs = std::move(inputs);
  node.owned = std::move(value);
  node.requires_grad = needs_grad && static_cast<bool>(backward);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return id;
}

const Tensor& Graph::value(NodeId id) const {
  const Node& node = nodes_.at(id);
  return node.external != nullptr ? *node.external : node.owned;
}

std::span<const float> Graph::grad(NodeId id) const {
  const Node& node = nodes_.at(id);
  if (node.grad.empty()) {
    throw ValidationError("graph: node " + std::to_string(id) + " (" + std::string(op_name(node.kind)) +
                          ") has no gradient");
  }
  return node.grad;
}

std::span<float> Graph::grad_buffer(NodeId id) {
  Node& node = nodes_.at(id);
  if (node.grad.empty()) node.grad.assign(value(id).numel(), 0.0f);
  return node.grad;
}

void Graph::backward(NodeId loss) {
  if (loss >= nodes_.size()) throw ValidationError("graph: loss node " + std::to_string(loss) + " does not exist");
  if (value(loss).numel() != 1) {
    throw ValidationError("graph: backward requires a scalar loss, node " + std::to_string(loss) + " has shape " +
                          shape_string(value(loss).shape()));
  }
  const float one = 1.0f;
  backward(loss, std::span<const float>(&one, 1));
}

void Graph::backward(NodeId output, std::span<const float> seed) {
  if (output >= nodes_.size()) throw ValidationError("graph: node " + std::to_string(output) + " does not exist");
  if (seed.size() != value(output).numel()) {
    throw ValidationError("graph: seed has " + std::to_string(seed.size()) + " elements, node " +
                          std::to_string(output) + " has " + std::to_string(value(output).numel()));
  }
  for (Node& node : nodes_) node.grad.clear();
  backward_order_.clear();
  auto root = grad_buffer(output);
  std::copy(seed.begin(), seed.end(), root.begin());
  for (NodeId id = output + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.grad.empty() || !node.requires_grad) continue;
    backward_order_.push_back(id);
    if (node.backward) node.backward(*this, id);
  }
}

}  // namespace catunet
