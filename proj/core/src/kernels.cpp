#include "catunet/kernels.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <string>

#include "catunet/errors.hpp"

namespace catunet::kernels {
namespace {

constexpr std::size_t kColumnTile = 256;

void require_rank4(const Shape& shape, const char* op, const char* arg) {
  if (shape.size() != 4) {
    throw ShapeError(std::string(op) + ": " + arg + " must be rank 4 (N,C,H,W), got " + shape_string(shape));
  }
}

// C[M x N] += A[M x K] * B[K x N]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  for (std::size_t j0 = 0; j0 < n; j0 += kColumnTile) {
    const std::size_t j1 = std::min(n, j0 + kColumnTile);
    for (std::size_t i = 0; i < m; ++i) {
      float* c_row = c + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const float scale = a[i * k + p];
        const float* b_row = b + p * n;
        for (std::size_t j = j0; j < j1; ++j) c_row[j] += scale * b_row[j];
      }
    }
  }
}

// C[M x K] += A[M x N] * B[K x N]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* a_row = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float* b_row = b + p * n;
      std::array<float, 8> lanes{};
      std::size_t j = 0;
      for (; j + 8 <= n; j += 8) {
        for (std::size_t l = 0; l < 8; ++l) lanes[l] += a_row[j + l] * b_row[j + l];
      }
      double total = 0.0;
      for (float lane : lanes) total += lane;
      for (; j < n; ++j) total += static_cast<double>(a_row[j]) * b_row[j];
      c[i * k + p] += static_cast<float>(total);
    }
  }
}

// C[K x N] += A[M x K]^T * B[M x N]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  for (std::size_t j0 = 0; j0 < n; j0 += kColumnTile) {
    const std::size_t j1 = std::min(n, j0 + kColumnTile);
    for (std::size_t p = 0; p < k; ++p) {
      float* c_row = c + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const float scale = a[i * k + p];
        const float* b_row = b + i * n;
        for (std::size_t j = j0; j < j1; ++j) c_row[j] += scale * b_row[j];
      }
    }
  }
}

struct ConvGeometry {
  std::size_t batch, in_channels, height, width;
  std::size_t out_channels, kernel_h, kernel_w;
  std::size_t out_h, out_w;
  std::ptrdiff_t stride, padding;

  std::size_t patch() const { return in_channels * kernel_h * kernel_w; }
  std::size_t positions() const { return out_h * out_w; }
  bool is_pointwise() const { return kernel_h == 1 && kernel_w == 1 && stride == 1 && padding == 0; }
};

ConvGeometry make_geometry(const Shape& input, const Shape& weight, Conv2dParams params) {
  const Shape out = conv2d_output_shape(input, weight, Shape{weight.empty() ? 0 : weight[0]}, params);
  return ConvGeometry{input[0], input[1], input[2], input[3], weight[0], weight[2], weight[3],
                      out[2],   out[3],   params.stride, params.padding};
}

void im2col(const ConvGeometry& g, const float* image, float* columns) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        float* row = columns + ((c * g.kernel_h + ky) * g.kernel_w + kx) * positions;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * g.stride - g.padding + static_cast<std::ptrdiff_t>(ky);
          float* out = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(out, out + g.out_w, 0.0f);
            continue;
          }
          const float* in_row = image + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox) * g.stride - g.padding + static_cast<std::ptrdiff_t>(kx);
            out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) ? 0.0f : in_row[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const float* columns, float* image) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        const float* row = columns + ((c * g.kernel_h + ky) * g.kernel_w + kx) * positions;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * g.stride - g.padding + static_cast<std::ptrdiff_t>(ky);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          float* in_row = image + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          const float* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox) * g.stride - g.padding + static_cast<std::ptrdiff_t>(kx);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) in_row[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Shape conv2d_output_shape(const Shape& input, const Shape& weight, const Shape& bias, Conv2dParams params) {
  require_rank4(input, "conv2d", "input");
  require_rank4(weight, "conv2d", "weight");
  if (params.stride < 1) {
    throw ValidationError("conv2d: stride must be >= 1, got " + std::to_string(params.stride));
  }
  if (params.padding < 0) {
    throw ValidationError("conv2d: padding must be >= 0, got " + std::to_string(params.padding));
  }
  if (weight[2] < 1 || weight[3] < 1) {
    throw ShapeError("conv2d: kernel must be at least 1x1, got " + shape_string(weight));
  }
  if (weight[1] != input[1]) {
    throw ShapeError("conv2d: weight Cin=" + std::to_string(weight[1]) + " does not match input Cin=" +
                     std::to_string(input[1]) + " (input " + shape_string(input) + ", weight " +
                     shape_string(weight) + ")");
  }
  if (bias.size() != 1 || bias[0] != weight[0]) {
    throw ShapeError("conv2d: bias " + shape_string(bias) + " does not match Cout=" + std::to_string(weight[0]));
  }
  const std::size_t pad2 = 2 * static_cast<std::size_t>(params.padding);
  if (input[2] + pad2 < weight[2] || input[3] + pad2 < weight[3]) {
    throw ShapeError("conv2d: padded input H=" + std::to_string(input[2] + pad2) + ",W=" +
                     std::to_string(input[3] + pad2) + " smaller than kernel " + std::to_string(weight[2]) + "x" +
                     std::to_string(weight[3]));
  }
  const auto stride = static_cast<std::size_t>(params.stride);
  return Shape{input[0], weight[0], (input[2] + pad2 - weight[2]) / stride + 1,
               (input[3] + pad2 - weight[3]) / stride + 1};
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias, Conv2dParams params) {
  Tensor output(conv2d_output_shape(input.shape(), weight.shape(), bias.shape(), params));
  const ConvGeometry g = make_geometry(input.shape(), weight.shape(), params);
  const std::size_t positions = g.positions();
  const std::size_t patch = g.patch();
  std::vector<float> columns(g.is_pointwise() ? 0 : patch * positions);

  for (std::size_t n = 0; n < g.batch; ++n) {
    const float* image = input.data() + n * g.in_channels * g.height * g.width;
    float* out = output.data() + n * g.out_channels * positions;
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      std::fill(out + co * positions, out + (co + 1) * positions, bias[co]);
    }
    const float* cols = image;
    if (!g.is_pointwise()) {
      im2col(g, image, columns.data());
      cols = columns.data();
    }
    gemm_nn(g.out_channels, positions, patch, weight.data(), cols, out);
  }
  return output;
}

void conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output, Conv2dParams params,
                     float* grad_input, float* grad_weight, float* grad_bias) {
  const ConvGeometry g = make_geometry(input.shape(), weight.shape(), params);
  const std::size_t positions = g.positions();
  const std::size_t patch = g.patch();
  if (grad_output.shape() != Shape{g.batch, g.out_channels, g.out_h, g.out_w}) {
    throw ShapeError("conv2d backward: gradient shape " + shape_string(grad_output.shape()) +
                     " does not match output shape");
  }
  std::vector<float> columns(g.is_pointwise() ? 0 : patch * positions);
  std::vector<float> grad_columns(grad_input != nullptr && !g.is_pointwise() ? patch * positions : 0);

  for (std::size_t n = 0; n < g.batch; ++n) {
    const float* image = input.data() + n * g.in_channels * g.height * g.width;
    const float* gout = grad_output.data() + n * g.out_channels * positions;

    if (grad_bias != nullptr) {
      for (std::size_t co = 0; co < g.out_channels; ++co) {
        double total = 0.0;
        for (std::size_t p = 0; p < positions; ++p) total += gout[co * positions + p];
        grad_bias[co] += static_cast<float>(total);
      }
    }
    if (grad_weight != nullptr) {
      const float* cols = image;
      if (!g.is_pointwise()) {
        im2col(g, image, columns.data());
        cols = columns.data();
      }
      gemm_nt(g.out_channels, positions, patch, gout, cols, grad_weight);
    }
    if (grad_input != nullptr) {
      float* gin = grad_input + n * g.in_channels * g.height * g.width;
      if (g.is_pointwise()) {
        gemm_tn(g.out_channels, positions, patch, weight.data(), gout, gin);
      } else {
        std::fill(grad_columns.begin(), grad_columns.end(), 0.0f);
        gemm_tn(g.out_channels, positions, patch, weight.data(), gout, grad_columns.data());
        col2im_add(g, grad_columns.data(), gin);
      }
    }
  }
}

Shape maxpool2d_output_shape(const Shape& input, PoolParams params) {
  require_rank4(input, "maxpool2d", "input");
  if (params.size < 1 || params.stride < 1) {
    throw ValidationError("maxpool2d: size and stride must be >= 1, got size=" + std::to_string(params.size) +
                          " stride=" + std::to_string(params.stride));
  }
  const auto size = static_cast<std::size_t>(params.size);
  const auto stride = static_cast<std::size_t>(params.stride);
  if (input[2] < size || input[3] < size) {
    throw ShapeError("maxpool2d: input " + shape_string(input) + " smaller than window " + std::to_string(size));
  }
  return Shape{input[0], input[1], (input[2] - size) / stride + 1, (input[3] - size) / stride + 1};
}

MaxPoolResult maxpool2d_forward(const Tensor& input, PoolParams params) {
  const Shape out_shape = maxpool2d_output_shape(input.shape(), params);
  MaxPoolResult result{Tensor(out_shape), std::vector<std::uint32_t>(shape_numel(out_shape))};
  if (input.numel() > std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("maxpool2d: input too large for 32-bit argmax indices");
  }
  const std::size_t height = input.dim(2), width = input.dim(3);
  const std::size_t out_h = out_shape[2], out_w = out_shape[3];
  const auto size = static_cast<std::size_t>(params.size);
  const auto stride = static_cast<std::size_t>(params.stride);
  const std::size_t planes = out_shape[0] * out_shape[1];

  std::size_t o = 0;
  for (std::size_t plane = 0; plane < planes; ++plane) {
    const std::size_t base = plane * height * width;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox, ++o) {
        std::size_t best = base + oy * stride * width + ox * stride;
        float best_value = input[best];
        for (std::size_t ky = 0; ky < size; ++ky) {
          for (std::size_t kx = 0; kx < size; ++kx) {
            const std::size_t idx = base + (oy * stride + ky) * width + ox * stride + kx;
            if (input[idx] > best_value) {
              best_value = input[idx];
              best = idx;
            }
          }
        }
        result.output[o] = best_value;
        result.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return result;
}

void maxpool2d_backward(const std::vector<std::uint32_t>& argmax, const Tensor& grad_output, float* grad_input) {
  for (std::size_t o = 0; o < argmax.size(); ++o) grad_input[argmax[o]] += grad_output[o];
}

Tensor upsample_nearest_forward(const Tensor& input, int factor) {
  require_rank4(input.shape(), "upsample_nearest", "input");
  if (factor < 1) throw ValidationError("upsample_nearest: factor must be >= 1, got " + std::to_string(factor));
  const auto f = static_cast<std::size_t>(factor);
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  Tensor output(Shape{input.dim(0), input.dim(1), height * f, width * f});
  const std::size_t out_w = width * f;
  for (std::size_t plane = 0; plane < planes; ++plane) {
    const float* src = input.data() + plane * height * width;
    float* dst = output.data() + plane * height * width * f * f;
    for (std::size_t y = 0; y < height * f; ++y) {
      const float* src_row = src + (y / f) * width;
      float* dst_row = dst + y * out_w;
      for (std::size_t x = 0; x < out_w; ++x) dst_row[x] = src_row[x / f];
    }
  }
  return output;
}

void upsample_nearest_backward(const Shape& input_shape, const Tensor& grad_output, int factor, float* grad_input) {
  const auto f = static_cast<std::size_t>(factor);
  const std::size_t planes = input_shape[0] * input_shape[1];
  const std::size_t height = input_shape[2], width = input_shape[3];
  const std::size_t out_w = width * f;
  for (std::size_t plane = 0; plane < planes; ++plane) {
    const float* src = grad_output.data() + plane * height * width * f * f;
    float* dst = grad_input + plane * height * width;
    for (std::size_t y = 0; y < height * f; ++y) {
      const float* src_row = src + y * out_w;
      float* dst_row = dst + (y / f) * width;
      for (std::size_t x = 0; x < out_w; ++x) dst_row[x / f] += src_row[x];
    }
  }
}

Tensor concat_channels_forward(const Tensor& a, const Tensor& b) {
  require_rank4(a.shape(), "concat_channels", "first input");
  require_rank4(b.shape(), "concat_channels", "second input");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: batch/spatial mismatch between " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " (N, H, W must agree)");
  }
  const std::size_t batch = a.dim(0);
  const std::size_t a_block = a.dim(1) * a.dim(2) * a.dim(3);
  const std::size_t b_block = b.dim(1) * b.dim(2) * b.dim(3);
  Tensor output(Shape{batch, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)});
  for (std::size_t n = 0; n < batch; ++n) {
    float* dst = output.data() + n * (a_block + b_block);
    std::copy_n(a.data() + n * a_block, a_block, dst);
    std::copy_n(b.data() + n * b_block, b_block, dst + a_block);
  }
  return output;
}

void concat_channels_backward(const Shape& a_shape, const Shape& b_shape, const Tensor& grad_output, float* grad_a,
                              float* grad_b) {
  const std::size_t batch = a_shape[0];
  const std::size_t a_block = a_shape[1] * a_shape[2] * a_shape[3];
  const std::size_t b_block = b_shape[1] * b_shape[2] * b_shape[3];
  for (std::size_t n = 0; n < batch; ++n) {
    const float* src = grad_output.data() + n * (a_block + b_block);
    if (grad_a != nullptr) {
      for (std::size_t i = 0; i < a_block; ++i) grad_a[n * a_block + i] += src[i];
    }
    if (grad_b != nullptr) {
      for (std::size_t i = 0; i < b_block; ++i) grad_b[n * b_block + i] += src[a_block + i];
    }
  }
}

}  // namespace catunet::kernels
