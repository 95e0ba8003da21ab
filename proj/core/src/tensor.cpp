#include "catunet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "catunet/errors.hpp"

namespace catunet {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)), values_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_numel(shape_) != values_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " holds " + std::to_string(shape_numel(shape_)) +
                     " elements but " + std::to_string(values_.size()) + " values were given");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
  }
  return shape_[axis];
}

float& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

float Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != values_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), values_);
}

std::span<float> Tensor::ensure_grad() {
  if (!has_grad_) {
    grad_.assign(values_.size(), 0.0f);
    has_grad_ = true;
  }
  return grad_;
}

std::span<float> Tensor::grad() {
  if (!has_grad_) throw ValidationError("tensor " + shape_string(shape_) + " has no gradient buffer");
  return grad_;
}

std::span<const float> Tensor::grad() const {
  if (!has_grad_) throw ValidationError("tensor " + shape_string(shape_) + " has no gradient buffer");
  return grad_;
}

void Tensor::zero_grad() {
  if (has_grad_) std::fill(grad_.begin(), grad_.end(), 0.0f);
}

void Tensor::clear_grad() noexcept {
  grad_.clear();
  grad_.shrink_to_fit();
  has_grad_ = false;
}

bool Tensor::all_finite() const noexcept {
  for (float v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape_ == b.shape_ && a.values_.size() == b.values_.size() &&
         (a.values_.empty() || std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(float)) == 0);
}

}  // namespace catunet
