#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace catunet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major float32 array. Images are channels-first (C,H,W), batches
/// are (N,C,H,W). An optional gradient buffer of the same shape can be
/// attached; parameters use it to carry the gradients of a training step.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  static Tensor scalar(float value) { return Tensor(Shape{1}, std::vector<float>{value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }
  float* data() noexcept { return values_.data(); }
  const float* data() const noexcept { return values_.data(); }

  float& operator[](std::size_t i) noexcept { return values_[i]; }
  float operator[](std::size_t i) const noexcept { return values_[i]; }

  /// Element access for rank-4 (N,C,H,W) tensors.
  float& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
  float at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  /// Same values viewed under another shape with the same element count.
  Tensor reshaped(Shape shape) const;

  bool has_grad() const noexcept { return has_grad_; }
  /// Allocates a zero gradient buffer if none is attached.
  std::span<float> ensure_grad();
  std::span<float> grad();
  std::span<const float> grad() const;
  void zero_grad();
  void clear_grad() noexcept;

  bool all_finite() const noexcept;

  /// Bitwise equality of shape and values; gradients are ignored.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  Shape shape_;
  std::vector<float> values_;
  std::vector<float> grad_;
  bool has_grad_ = false;
};

}  // namespace catunet
