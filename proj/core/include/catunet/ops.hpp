#pragma once

#include "catunet/autodiff.hpp"
#include "catunet/kernels.hpp"
#include "catunet/rng.hpp"

namespace catunet::ops {

using kernels::Conv2dParams;
using kernels::PoolParams;

NodeId conv2d(Graph& g, NodeId input, NodeId weight, NodeId bias, Conv2dParams params);
NodeId maxpool2d(Graph& g, NodeId input, PoolParams params = {});
NodeId upsample_nearest(Graph& g, NodeId input, int factor = 2);
/// Channels of `a` followed by channels of `b`.
NodeId concat_channels(Graph& g, NodeId a, NodeId b);
/// Subgradient at exactly zero is zero.
NodeId relu(Graph& g, NodeId input);
/// Inverted dropout: survivors are scaled by 1/(1-rate). Identity when not
/// training or rate == 0; the mask comes from `rng` only when it is used.
NodeId dropout(Graph& g, NodeId input, double rate, bool training, Rng& rng);
/// Mean of squared differences, accumulated in double. Scalar output.
NodeId mse(Graph& g, NodeId a, NodeId b);
/// Sum of squared elements (L2 penalty). Scalar output.
NodeId sum_squares(Graph& g, NodeId input);
/// Elementwise sum of two same-shape tensors.
NodeId add(Graph& g, NodeId a, NodeId b);
NodeId scale(Graph& g, NodeId input, float factor);

}  // namespace catunet::ops
