#include "artk/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "artk/errors.hpp"

namespace artk {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor::Tensor(Shape shape, Real fill)
    : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<Real> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (numel(shape_) != data_.size()) {
    throw ContractViolation("Tensor: shape " + shape_str(shape_) + " holds " +
                            std::to_string(numel(shape_)) + " elements, got " +
                            std::to_string(data_.size()));
  }
}

Real Tensor::item() const {
  if (data_.size() != 1) {
    throw ContractViolation("Tensor::item on shape " + shape_str(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (numel(shape) != data_.size()) {
    throw ContractViolation("reshape " + shape_str(shape_) + " -> " +
                            shape_str(shape));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

bool Tensor::all_finite() const noexcept {
  for (Real v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace artk
