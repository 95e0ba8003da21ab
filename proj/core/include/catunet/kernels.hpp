#pragma once

// Raw forward/backward kernels on plain tensors. The autodiff layer in ops.hpp
// wraps these; they are also used directly by inference benchmarks.
//
// Backward kernels accumulate (+=) into caller-provided buffers; a null buffer
// means that gradient is not wanted.

#include <cstdint>
#include <vector>

#include "catunet/tensor.hpp"

namespace catunet::kernels {

struct Conv2dParams {
  int stride = 1;
  int padding = 0;
};

/// Output shape of conv2d, validating every precondition.
Shape conv2d_output_shape(const Shape& input, const Shape& weight, const Shape& bias, Conv2dParams params);

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias, Conv2dParams params);

void conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output, Conv2dParams params,
                     float* grad_input, float* grad_weight, float* grad_bias);

struct PoolParams {
  int size = 2;
  int stride = 2;
};

struct MaxPoolResult {
  Tensor output;
  /// Flat input index of the selected element for every output element.
  std::vector<std::uint32_t> argmax;
};

Shape maxpool2d_output_shape(const Shape& input, PoolParams params);

/// Windows that do not fit entirely are dropped (floor semantics). Ties go to
/// the first element in row-major window order.
MaxPoolResult maxpool2d_forward(const Tensor& input, PoolParams params);

void maxpool2d_backward(const std::vector<std::uint32_t>& argmax, const Tensor& grad_output, float* grad_input);

Tensor upsample_nearest_forward(const Tensor& input, int factor);

void upsample_nearest_backward(const Shape& input_shape, const Tensor& grad_output, int factor, float* grad_input);

Tensor concat_channels_forward(const Tensor& a, const Tensor& b);

void concat_channels_backward(const Shape& a_shape, const Shape& b_shape, const Tensor& grad_output, float* grad_a,
                              float* grad_b);

}  // namespace catunet::kernels
