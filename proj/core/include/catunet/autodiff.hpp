#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "catunet/tensor.hpp"

namespace catunet {

using NodeId = std::size_t;

enum class OpKind {
  constant,
  parameter,
  conv2d,
  maxpool2d,
  upsample_nearest,
  concat_channels,
  relu,
  dropout,
  mse,
  sum_squares,
  add,
  scale,
};

std::string_view op_name(OpKind kind);

/// Tape of a single forward computation. Nodes are appended in execution
/// order, so the tape is topologically sorted by construction and backward
/// simply walks it in reverse.
///
/// Leaves are either owned constants or references to external tensors
/// (model parameters). Referenced tensors must outlive the graph and must not
/// be modified while it is alive.
class Graph {
 public:
  /// Receives the graph and the id of the node whose gradient is ready.
  using BackwardFn = std::function<void(Graph&, NodeId)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  NodeId constant(Tensor value, bool requires_grad = false);
  /// Leaf bound to an external tensor; its gradient is collected by the caller
  /// after backward().
  NodeId parameter(const Tensor& value);
  /// Leaf bound to an external tensor that never receives a gradient.
  NodeId frozen(const Tensor& value);

  /// Appends an operation node. `backward` may be empty for nodes that never
  /// need to propagate (e.g. when no input requires a gradient).
  NodeId record(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(NodeId id) const;
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  std::span<const NodeId> inputs(NodeId id) const { return nodes_.at(id).inputs; }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  bool has_grad(NodeId id) const { return !nodes_.at(id).grad.empty(); }
  /// Gradient of the last backward() target with respect to this node.
  std::span<const float> grad(NodeId id) const;
  /// Mutable gradient buffer, zero-allocated on first access. Used by
  /// backward functions to accumulate into their inputs.
  std::span<float> grad_buffer(NodeId id);

  /// Reverse-mode sweep from a scalar node. Gradients accumulate when a node
  /// feeds several consumers. Throws ValidationError for non-scalar targets.
  void backward(NodeId loss);
  /// Vector-Jacobian product: seeds `output` with `seed` (same element count)
  /// and propagates to every node that requires a gradient.
  void backward(NodeId output, std::span<const float> seed);

  /// Order in which the last backward() visited nodes (for tests).
  const std::vector<NodeId>& last_backward_order() const noexcept { return backward_order_; }

 private:
  struct Node {
    OpKind kind = OpKind::constant;
    std::vector<NodeId> inputs;
    Tensor owned;
    const Tensor* external = nullptr;
    std::vector<float> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<NodeId> backward_order_;
};

}  // namespace catunet
