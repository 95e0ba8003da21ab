#include "catunet/ops.hpp"

#include <memory>
#include <string>

#include "catunet/errors.hpp"

namespace catunet::ops {
namespace {

float* grad_or_null(Graph& g, NodeId id) { return g.requires_grad(id) ? g.grad_buffer(id).data() : nullptr; }

Tensor grad_tensor(const Graph& g, NodeId id) {
  const auto grad = g.grad(id);
  return Tensor(g.value(id).shape(), std::vector<float>(grad.begin(), grad.end()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

}  // namespace

NodeId conv2d(Graph& g, NodeId input, NodeId weight, NodeId bias, Conv2dParams params) {
  Tensor out = kernels::conv2d_forward(g.value(input), g.value(weight), g.value(bias), params);
  return g.record(OpKind::conv2d, {input, weight, bias}, std::move(out),
                  [input, weight, bias, params](Graph& graph, NodeId self) {
                    const Tensor upstream = grad_tensor(graph, self);
                    kernels::conv2d_backward(graph.value(input), graph.value(weight), upstream, params,
                                             grad_or_null(graph, input), grad_or_null(graph, weight),
                                             grad_or_null(graph, bias));
                  });
}

NodeId maxpool2d(Graph& g, NodeId input, PoolParams params) {
  kernels::MaxPoolResult pooled = kernels::maxpool2d_forward(g.value(input), params);
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(std::move(pooled.argmax));
  return g.record(OpKind::maxpool2d, {input}, std::move(pooled.output), [input, argmax](Graph& graph, NodeId self) {
    kernels::maxpool2d_backward(*argmax, grad_tensor(graph, self), graph.grad_buffer(input).data());
  });
}

NodeId upsample_nearest(Graph& g, NodeId input, int factor) {
  Tensor out = kernels::upsample_nearest_forward(g.value(input), factor);
  return g.record(OpKind::upsample_nearest, {input}, std::move(out), [input, factor](Graph& graph, NodeId self) {
    kernels::upsample_nearest_backward(graph.value(input).shape(), grad_tensor(graph, self), factor,
                                       graph.grad_buffer(input).data());
  });
}

NodeId concat_channels(Graph& g, NodeId a, NodeId b) {
  Tensor out = kernels::concat_channels_forward(g.value(a), g.value(b));
  return g.record(OpKind::concat_channels, {a, b}, std::move(out), [a, b](Graph& graph, NodeId self) {
    kernels::concat_channels_backward(graph.value(a).shape(), graph.value(b).shape(), grad_tensor(graph, self),
                                      grad_or_null(graph, a), grad_or_null(graph, b));
  });
}

NodeId relu(Graph& g, NodeId input) {
  const Tensor& x = g.value(input);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
  return g.record(OpKind::relu, {input}, std::move(out), [input](Graph& graph, NodeId self) {
    const Tensor& xv = graph.value(input);
    const auto upstream = graph.grad(self);
    auto gin = graph.grad_buffer(input);
    for (std::size_t i = 0; i < gin.size(); ++i) {
      if (xv[i] > 0.0f) gin[i] += upstream[i];
    }
  });
}

NodeId dropout(Graph& g, NodeId input, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ValidationError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  const Tensor& x = g.value(input);
  if (!training || rate == 0.0) {
    return g.record(OpKind::dropout, {input}, x, [input](Graph& graph, NodeId self) {
      const auto upstream = graph.grad(self);
      auto gin = graph.grad_buffer(input);
      for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += upstream[i];
    });
  }
  const float keep_scale = static_cast<float>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<float>>(x.numel());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    (*mask)[i] = rng.uniform() < rate ? 0.0f : keep_scale;
    out[i] = x[i] * (*mask)[i];
  }
  return g.record(OpKind::dropout, {input}, std::move(out), [input, mask](Graph& graph, NodeId self) {
    const auto upstream = graph.grad(self);
    auto gin = graph.grad_buffer(input);
    for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += upstream[i] * (*mask)[i];
  });
}

NodeId mse(Graph& g, NodeId a, NodeId b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require_same_shape(av, bv, "mse");
  if (av.numel() == 0) throw ValidationError("mse: empty tensors");
  double total = 0.0;
  for (std::size_t i = 0; i < av.numel(); ++i) {
    const double d = static_cast<double>(av[i]) - bv[i];
    total += d * d;
  }
  const double count = static_cast<double>(av.numel());
  return g.record(OpKind::mse, {a, b}, Tensor::scalar(static_cast<float>(total / count)),
                  [a, b, count](Graph& graph, NodeId self) {
                    const double upstream = graph.grad(self)[0];
                    const Tensor& x = graph.value(a);
                    const Tensor& y = graph.value(b);
                    const double factor = 2.0 * upstream / count;
                    float* ga = grad_or_null(graph, a);
                    float* gb = grad_or_null(graph, b);
                    for (std::size_t i = 0; i < x.numel(); ++i) {
                      const auto d = static_cast<float>(factor * (static_cast<double>(x[i]) - y[i]));
                      if (ga != nullptr) ga[i] += d;
                      if (gb != nullptr) gb[i] -= d;
                    }
                  });
}

NodeId sum_squares(Graph& g, NodeId input) {
  const Tensor& x = g.value(input);
  double total = 0.0;
  for (float v : x.values()) total += static_cast<double>(v) * v;
  return g.record(OpKind::sum_squares, {input}, Tensor::scalar(static_cast<float>(total)),
                  [input](Graph& graph, NodeId self) {
                    const float upstream = graph.grad(self)[0];
                    const Tensor& xv = graph.value(input);
                    auto gin = graph.grad_buffer(input);
                    for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += 2.0f * upstream * xv[i];
                  });
}

NodeId add(Graph& g, NodeId a, NodeId b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require_same_shape(av, bv, "add");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] + bv[i];
  return g.record(OpKind::add, {a, b}, std::move(out), [a, b](Graph& graph, NodeId self) {
    const auto upstream = graph.grad(self);
    for (NodeId target : {a, b}) {
      if (!graph.requires_grad(target)) continue;
      auto gin = graph.grad_buffer(target);
      for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += upstream[i];
    }
  });
}

NodeId scale(Graph& g, NodeId input, float factor) {
  const Tensor& x = g.value(input);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] * factor;
  return g.record(OpKind::scale, {input}, std::move(out), [input, factor](Graph& graph, NodeId self) {
    const auto upstream = graph.grad(self);
    auto gin = graph.grad_buffer(input);
    for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += upstream[i] * factor;
  });
}

}  // namespace catunet::ops
