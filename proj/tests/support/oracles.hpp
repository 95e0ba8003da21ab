#pragma once

// Direct nested-loop reference implementations. Slow and obvious on purpose:
// the optimized kernels are checked against these.

#include <algorithm>
#include <cstddef>
#include <cmath>
#include <limits>

#include "catunet/rng.hpp"
#include "catunet/tensor.hpp"

namespace catunet::oracle {

inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  Tensor y(Shape{n, cout, oh, ow});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
          double acc = b[o];
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long yy = static_cast<long>(r * stride + u) - pad;
                const long xx = static_cast<long>(c * stride + v) - pad;
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(wd)) continue;
                acc += static_cast<double>(x.at(i, ci, yy, xx)) * w.at(o, ci, u, v);
              }
          y.at(i, o, r, c) = static_cast<float>(acc);
        }
  return y;
}

inline Tensor maxpool2d(const Tensor& x, int size, int stride) {
  const std::size_t n = x.dim(0), ch = x.dim(1);
  const std::size_t oh = (x.dim(2) - size) / stride + 1, ow = (x.dim(3) - size) / stride + 1;
  Tensor y(Shape{n, ch, oh, ow});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t q = 0; q < ow; ++q) {
          float best = -std::numeric_limits<float>::infinity();
          for (int u = 0; u < size; ++u)
            for (int v = 0; v < size; ++v) best = std::max(best, x.at(i, c, r * stride + u, q * stride + v));
          y.at(i, c, r, q) = best;
        }
  return y;
}

inline Tensor upsample_nearest(const Tensor& x, int factor) {
  Tensor y(Shape{x.dim(0), x.dim(1), x.dim(2) * factor, x.dim(3) * factor});
  for (std::size_t i = 0; i < y.dim(0); ++i)
    for (std::size_t c = 0; c < y.dim(1); ++c)
      for (std::size_t r = 0; r < y.dim(2); ++r)
        for (std::size_t q = 0; q < y.dim(3); ++q) y.at(i, c, r, q) = x.at(i, c, r / factor, q / factor);
  return y;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]));
  return worst;
}

}  // namespace catunet::oracle
